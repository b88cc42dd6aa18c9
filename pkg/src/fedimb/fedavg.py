"""Federated averaging over a partition plan.

One experiment = one plan + one model spec + one FLConfig. Each round:
sample clients, run local SGD from the current global parameters, merge
the size-weighted parameter deltas, evaluate on the held-out test set.

Every random draw comes from a stream keyed by (seed, tag, round, ...) so
results are bit-identical for a given config regardless of thread count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .backends import get_backend
from .data import Dataset
from .errors import ConfigError, InputError, IntegrityError, NumericError
from .models import ModelParams, ModelSpec, _check_batch, init_params, predict, sgd_step
from .models import gradient as model_gradient
from .models import loss as model_loss
from .partition import PartitionPlan
from .streams import TAG_CENTRAL, TAG_LOCAL, TAG_SAMPLING, child_rng


@dataclass(frozen=True)
class FLConfig:
    rounds: int = 50
    clients_per_round: int = 10
    local_epochs: int = 5
    batch_size: int = 128
    local_lr: float = 0.1
    server_lr: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        if self.clients_per_round < 1:
            raise ConfigError(f"clients_per_round must be >= 1, got {self.clients_per_round}")
        if self.local_epochs < 0:
            raise ConfigError(f"local_epochs must be >= 0, got {self.local_epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        for name in ("local_lr", "server_lr"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ConfigError(f"{name} must be a positive finite float, got {v}")


@dataclass(frozen=True)
class EvalReport:
    """Test-set quality of one parameter vector."""

    accuracy: float
    macro_f1: float
    confusion: np.ndarray   # (C, C), rows = true class, cols = predicted
    precision: np.ndarray   # (C,), 0 where the class was never predicted
    recall: np.ndarray      # (C,), 0 where the class has no test samples

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EvalReport):
            return NotImplemented
        return (self.accuracy == other.accuracy and self.macro_f1 == other.macro_f1
                and np.array_equal(self.confusion, other.confusion)
                and np.array_equal(self.precision, other.precision)
                and np.array_equal(self.recall, other.recall))


@dataclass(frozen=True)
class RoundLog:
    round: int                 # 1-based
    selected: tuple[int, ...]  # ascending client ids
    accuracy: float
    macro_f1: float
    mean_local_loss: float     # unweighted mean over selected clients
    recalls: np.ndarray = field(compare=False)


def select_clients(P: int, m: int, seed: int, round_index: int) -> np.ndarray:
    """m distinct client ids for one round, returned ascending."""
    if not 1 <= m <= P:
        raise ConfigError(f"need 1 <= clients_per_round <= P, got m={m}, P={P}")
    rng = child_rng(seed, TAG_SAMPLING, round_index)
    return np.sort(rng.choice(P, size=m, replace=False)).astype(np.int64)


def local_train(params: ModelParams, X: np.ndarray, y: np.ndarray, *,
                epochs: int, batch_size: int, lr: float,
                seed: int, round_index: int, client_id: int) -> tuple[ModelParams, float]:
    """Run `epochs` of minibatch SGD from a copy of `params`.

    Returns the trained parameters and the mean training loss of the last
    epoch (pre-update, sample-weighted). epochs=0 evaluates without training.
    """
    X, y = _check_batch(params.spec, X, y)
    if epochs == 0:
        return ModelParams(params.values.copy(), params.spec), model_loss(params, X, y)
    rng = child_rng(seed, TAG_LOCAL, round_index, client_id)
    perms = np.stack([rng.permutation(y.shape[0]) for _ in range(epochs)])
    values = params.values.copy()
    spec = params.spec
    backend = get_backend()
    if spec.kind == "logistic":
        last = backend.logistic_train_epochs(values, X, y, perms, batch_size, lr, spec.C)
    else:
        last = backend.mlp_train_epochs(values, X, y, perms, batch_size, lr,
                                        spec.hidden_dim, spec.C)
    if not math.isfinite(last) or not np.all(np.isfinite(values)):
        raise NumericError(
            f"non-finite parameters after local training "
            f"(round {round_index}, client {client_id}); lower local_lr")
    return ModelParams(values, spec), float(last)


def aggregate(global_params: ModelParams,
              updates: Sequence[tuple[int, ModelParams, int]],
              server_lr: float = 1.0) -> ModelParams:
    """Merge client results into new global parameters.

    updates holds (client_id, trained_params, n_samples) triples; weights are
    n_i over the total across the given updates. The merge is computed in
    ascending client-id order so the result is independent of input order.
    """
    if not updates:
        raise InputError("aggregate needs at least one update")
    ordered = sorted(updates, key=lambda u: u[0])
    ids = [u[0] for u in ordered]
    if len(set(ids)) != len(ids):
        raise InputError(f"duplicate client ids in updates: {ids}")
    total = 0
    for cid, p, n_i in ordered:
        if p.spec != global_params.spec:
            raise InputError(f"client {cid}: parameter spec differs from global")
        if n_i < 1:
            raise InputError(f"client {cid}: n_samples must be >= 1, got {n_i}")
        total += n_i
    w = global_params.values
    delta = np.zeros_like(w)
    for cid, p, n_i in ordered:
        delta += (n_i / total) * (p.values - w)
    return ModelParams(w + server_lr * delta, global_params.spec)


def evaluate_global(params: ModelParams, X: np.ndarray, y: np.ndarray) -> EvalReport:
    """Accuracy, macro-F1, confusion and per-class precision/recall."""
    X, y = _check_batch(params.spec, X, y)
    C = params.spec.C
    preds = predict(params, X)
    confusion = np.bincount(y * C + preds, minlength=C * C).reshape(C, C)
    diag = np.diag(confusion).astype(np.float64)
    row = confusion.sum(axis=1).astype(np.float64)
    col = confusion.sum(axis=0).astype(np.float64)
    recall = np.divide(diag, row, out=np.zeros(C), where=row > 0)
    precision = np.divide(diag, col, out=np.zeros(C), where=col > 0)
    pr = precision + recall
    f1 = np.divide(2.0 * precision * recall, pr, out=np.zeros(C), where=pr > 0)
    return EvalReport(
        accuracy=float(diag.sum() / y.shape[0]),
        macro_f1=float(f1.mean()),
        confusion=confusion,
        precision=precision,
        recall=recall,
    )


def run_experiment(train: Dataset, test: Dataset, plan: PartitionPlan,
                   spec: ModelSpec, cfg: FLConfig, *, threads: int = 1,
                   param_trace: list[np.ndarray] | None = None,
                   progress: Callable[[RoundLog], None] | None = None
                   ) -> tuple[list[RoundLog], EvalReport]:
    """Full federated run: per-round logs plus the final evaluation.

    threads > 1 trains the selected clients concurrently; results are
    bit-identical either way because every client draws from its own
    (seed, round, client) stream and merging is order-canonical.
    """
    if (plan.dataset_sha256 != train.sha256() or plan.dataset_n != train.n
            or plan.dataset_C != train.C):
        raise IntegrityError(
            f"plan was built for {plan.dataset_name}, not {train.name}: fingerprint mismatch")
    if spec.input_dim != train.d or spec.C != train.C:
        raise ConfigError(
            f"model expects d={spec.input_dim}, C={spec.C}; "
            f"dataset has d={train.d}, C={train.C}")
    if test.d != train.d or test.C != train.C:
        raise InputError("test set shape does not match training set")
    P = len(plan.assignments)
    if cfg.clients_per_round > P:
        raise ConfigError(f"clients_per_round={cfg.clients_per_round} exceeds P={P}")
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")

    client_X = [np.ascontiguousarray(train.features[idx]) for idx in plan.assignments]
    client_y = [np.ascontiguousarray(train.labels[idx]) for idx in plan.assignments]

    params = init_params(spec)
    logs: list[RoundLog] = []
    report = evaluate_global(params, test.features, test.labels)
    for t in range(1, cfg.rounds + 1):
        selected = select_clients(P, cfg.clients_per_round, cfg.seed, t)

        def _one(cid: int, t: int = t, params: ModelParams = params
                 ) -> tuple[ModelParams, float]:
            return local_train(params, client_X[cid], client_y[cid],
                               epochs=cfg.local_epochs, batch_size=cfg.batch_size,
                               lr=cfg.local_lr, seed=cfg.seed,
                               round_index=t, client_id=cid)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(_one, selected))
        else:
            results = [_one(cid) for cid in selected]

        updates = [(int(cid), trained, client_y[cid].shape[0])
                   for cid, (trained, _) in zip(selected, results)]
        params = aggregate(params, updates, cfg.server_lr)
        if param_trace is not None:
            param_trace.append(params.values.copy())
        report = evaluate_global(params, test.features, test.labels)
        logs.append(RoundLog(
            round=t,
            selected=tuple(int(c) for c in selected),
            accuracy=report.accuracy,
            macro_f1=report.macro_f1,
            mean_local_loss=float(np.mean([loss for _, loss in results])),
            recalls=report.recall,
        ))
        if progress is not None:
            progress(logs[-1])
    return logs, report


def centralized_baseline(train: Dataset, test: Dataset, spec: ModelSpec, *,
                         steps: int, lr: float, batch_size: int, seed: int = 0,
                         param_trace: list[np.ndarray] | None = None) -> list[EvalReport]:
    """Plain minibatch SGD on the pooled data; steps+1 reports (initial first).

    batch_size >= n uses every sample in storage order, so one step is exact
    full-batch gradient descent.
    """
    if steps < 0:
        raise ConfigError(f"steps must be >= 0, got {steps}")
    if spec.input_dim != train.d or spec.C != train.C:
        raise ConfigError(
            f"model expects d={spec.input_dim}, C={spec.C}; "
            f"dataset has d={train.d}, C={train.C}")
    params = init_params(spec)
    reports = [evaluate_global(params, test.features, test.labels)]
    n = train.n
    for step in range(1, steps + 1):
        if batch_size >= n:
            Xb, yb = train.features, train.labels
        else:
            idx = child_rng(seed, TAG_CENTRAL, step).permutation(n)[:batch_size]
            Xb, yb = train.features[idx], train.labels[idx]
        grad = model_gradient(params, Xb, yb)
        params = sgd_step(params, grad, lr)
        if param_trace is not None:
            param_trace.append(params.values.copy())
        reports.append(evaluate_global(params, test.features, test.labels))
    return reports
