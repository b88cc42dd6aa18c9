"""Differentiable classifiers with verifiable gradients.

Two model kinds, both trained with softmax cross-entropy:

* "logistic": linear softmax regression;
* "mlp": one tanh hidden layer, then a linear softmax head.

Parameters live in a single flat float64 vector (layouts documented in
`_backend_numpy`). Analytic gradients come from the active backend; an
independent central-difference oracle is provided for verification.
"""
from __future__ import annotations

import struct
from collections.abc import Callable
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .backends import get_backend
from .errors import FormatError, InputError, NumericError
from .streams import child_rng

KINDS = ("logistic", "mlp")

_CKPT_MAGIC = b"FIMB"
_CKPT_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    input_dim: int
    C: int
    hidden_dim: int | None = None  # mlp only
    init_seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InputError(f"unknown model kind {self.kind!r}")
        if self.input_dim < 1 or self.C < 2:
            raise InputError(f"invalid dims: d={self.input_dim}, C={self.C}")
        if self.kind == "mlp":
            if self.hidden_dim is None or self.hidden_dim < 1:
                raise InputError("mlp requires hidden_dim >= 1")
        elif self.hidden_dim is not None:
            raise InputError("hidden_dim only applies to mlp")


@dataclass
class ModelParams:
    values: np.ndarray
    spec: ModelSpec

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != (n_params(self.spec),):
            raise InputError(f"expected {n_params(self.spec)} values, got shape {values.shape}")
        self.values = values


def n_params(spec: ModelSpec) -> int:
    d, C = spec.input_dim, spec.C
    if spec.kind == "logistic":
        return d * C + C
    h = spec.hidden_dim
    return d * h + h + h * C + C


def init_params(spec: ModelSpec) -> ModelParams:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases, from spec.init_seed."""
    rng = child_rng(spec.init_seed)
    d, C = spec.input_dim, spec.C
    if spec.kind == "logistic":
        a = 1.0 / np.sqrt(d)
        values = np.concatenate([rng.uniform(-a, a, d * C), np.zeros(C)])
    else:
        h = spec.hidden_dim
        a1 = 1.0 / np.sqrt(d)
        a2 = 1.0 / np.sqrt(h)
        values = np.concatenate([
            rng.uniform(-a1, a1, d * h), np.zeros(h),
            rng.uniform(-a2, a2, h * C), np.zeros(C),
        ])
    return ModelParams(values, spec)


def loss(params: ModelParams, X: np.ndarray, y: np.ndarray) -> float:
    """Mean softmax cross-entropy over a non-empty batch."""
    X, y = _check_batch(params.spec, X, y)
    backend = get_backend()
    if params.spec.kind == "logistic":
        value, _ = backend.logistic_loss_grad(params.values, X, y, params.spec.C)
    else:
        value, _ = backend.mlp_loss_grad(params.values, X, y, params.spec.hidden_dim, params.spec.C)
    return float(value)


def gradient(params: ModelParams, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Analytic gradient of `loss` with respect to the flat parameter vector."""
    X, y = _check_batch(params.spec, X, y)
    backend = get_backend()
    if params.spec.kind == "logistic":
        _, grad = backend.logistic_loss_grad(params.values, X, y, params.spec.C)
    else:
        _, grad = backend.mlp_loss_grad(params.values, X, y, params.spec.hidden_dim, params.spec.C)
    return grad


def finite_diff(f: Callable[[np.ndarray], float], x: np.ndarray, epsilon: float) -> np.ndarray:
    """Central-difference gradient estimate of a scalar function."""
    if not epsilon > 0.0:
        raise InputError(f"epsilon must be positive, got {epsilon}")
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for i in range(x.size):
        up = x.copy()
        down = x.copy()
        up[i] += epsilon
        down[i] -= epsilon
        grad[i] = (f(up) - f(down)) / (2.0 * epsilon)
    return grad


def finite_diff_gradient(params: ModelParams, X: np.ndarray, y: np.ndarray,
                         epsilon: float = 1e-5) -> np.ndarray:
    """Independent oracle for `gradient`, one loss pair per coordinate."""
    X, y = _check_batch(params.spec, X, y)
    spec = params.spec
    return finite_diff(lambda v: loss(ModelParams(v, spec), X, y), params.values, epsilon)


def sgd_step(params: ModelParams, grad: np.ndarray, lr: float) -> ModelParams:
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.values.shape:
        raise InputError(f"gradient shape {grad.shape} != params shape {params.values.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient")
    return ModelParams(params.values - lr * grad, params.spec)


def predict(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """Argmax class per row; ties break toward the lowest class index."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.spec.input_dim:
        raise InputError(f"features shape {X.shape} does not match d={params.spec.input_dim}")
    backend = get_backend()
    if params.spec.kind == "logistic":
        logits = backend.logistic_logits(params.values, X, params.spec.C)
    else:
        logits = backend.mlp_logits(params.values, X, params.spec.hidden_dim, params.spec.C)
    return np.argmax(logits, axis=1)


def save_params(params: ModelParams, path: str | Path) -> None:
    """Checkpoint: magic, version, spec fields, then float64 LE values."""
    spec = params.spec
    header = struct.pack(
        "<4sIBIIIQQ",
        _CKPT_MAGIC, _CKPT_VERSION,
        KINDS.index(spec.kind),
        spec.input_dim, spec.hidden_dim or 0, spec.C,
        spec.init_seed, params.values.shape[0],
    )
    Path(path).write_bytes(header + params.values.astype("<f8").tobytes())


def load_params(path: str | Path) -> ModelParams:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    head_size = struct.calcsize("<4sIBIIIQQ")
    if len(raw) < head_size:
        raise FormatError(f"{path}: truncated checkpoint header")
    magic, version, kind_code, d, h, C, init_seed, count = struct.unpack_from("<4sIBIIIQQ", raw)
    if magic != _CKPT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != _CKPT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    if kind_code >= len(KINDS):
        raise FormatError(f"{path}: unknown model kind code {kind_code}")
    try:
        spec = ModelSpec(KINDS[kind_code], d, C, h or None, init_seed)
    except InputError as exc:
        raise FormatError(f"{path}: invalid spec in checkpoint: {exc}") from exc
    if count != n_params(spec) or len(raw) != head_size + 8 * count:
        raise FormatError(f"{path}: value count does not match spec")
    values = np.frombuffer(raw, dtype="<f8", offset=head_size).astype(np.float64)
    return ModelParams(values, spec)


def _check_batch(spec: ModelSpec, X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise InputError(f"bad batch shapes: {X.shape}, {y.shape}")
    if X.shape[0] == 0:
        raise InputError("empty batch")
    if X.shape[1] != spec.input_dim:
        raise InputError(f"features have d={X.shape[1]}, spec has d={spec.input_dim}")
    if y.min() < 0 or y.max() >= spec.C:
        raise InputError(f"labels outside [0, {spec.C})")
    return X, y
