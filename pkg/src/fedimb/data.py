"""Dataset loading and generation.

Three sources: MNIST IDX file pairs, CIFAR-10 binary batches, and synthetic
Gaussian blobs for fast tests. All loaders return the same in-memory Dataset
shape: features scaled into [0, 1], integer labels in [0, C).

Files must be plain (uncompressed); decompression is the caller's problem.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, InputError
from .streams import child_rng

_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801
_CIFAR_RECORD = 3073  # 1 label byte + 32*32*3 pixel bytes


@dataclass
class Dataset:
    """An in-memory classification dataset.

    features: (n, d) float64 in [0, 1]; labels: (n,) int64 in [0, C).
    Instances are treated as immutable after construction; the content
    fingerprint is computed lazily and cached.
    """

    features: np.ndarray
    labels: np.ndarray
    C: int
    name: str
    _sha256: str | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise InputError(f"features must be 2-D, got shape {features.shape}")
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise InputError(f"got {features.shape[0]} feature rows, {labels.shape[0]} labels")
        if self.C < 2:
            raise InputError(f"C must be >= 2, got {self.C}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.C):
            raise InputError(f"labels outside [0, {self.C})")
        if features.size and (features.min() < 0.0 or features.max() > 1.0):
            raise InputError("features outside [0, 1]")
        self.features = features
        self.labels = labels

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    def sha256(self) -> str:
        """Content hash over labels then features, both little-endian."""
        if self._sha256 is None:
            h = hashlib.sha256()
            h.update(self.labels.astype("<i8").tobytes())
            h.update(self.features.astype("<f8").tobytes())
            self._sha256 = h.hexdigest()
        return self._sha256


@dataclass(frozen=True)
class SynthConfig:
    """Gaussian-blob generator settings."""

    C: int
    per_class: int
    d: int
    spread: float
    seed: int

    def __post_init__(self) -> None:
        if self.C < 2 or self.per_class < 1 or self.d < 1 or not self.spread > 0.0:
            raise ConfigError(f"invalid synth config: {self}")
        if self.C > 2 * self.d:
            raise ConfigError(f"cannot place {self.C} distinct blob means in {self.d} dimensions")


def load_mnist_idx(images_path: str | Path, labels_path: str | Path) -> Dataset:
    """Load an MNIST-format IDX image/label file pair.

    Args:
        images_path: idx3-ubyte file (magic 0x00000803, big-endian dims).
        labels_path: idx1-ubyte file (magic 0x00000801).

    Returns:
        Dataset with n x (rows*cols) features scaled by 1/255, C=10.
    """
    images_raw = _read_bytes(images_path)
    labels_raw = _read_bytes(labels_path)

    magic, n_img, rows, cols = _unpack_header(images_raw, ">iiii", images_path)
    if magic != _IDX_IMAGES_MAGIC:
        raise FormatError(f"{images_path}: bad magic 0x{magic:08x}, expected 0x{_IDX_IMAGES_MAGIC:08x}")
    pixel_count = n_img * rows * cols
    if len(images_raw) != 16 + pixel_count:
        raise FormatError(f"{images_path}: expected {16 + pixel_count} bytes, found {len(images_raw)}")

    magic, n_lab = _unpack_header(labels_raw, ">ii", labels_path)
    if magic != _IDX_LABELS_MAGIC:
        raise FormatError(f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{_IDX_LABELS_MAGIC:08x}")
    if len(labels_raw) != 8 + n_lab:
        raise FormatError(f"{labels_path}: expected {8 + n_lab} bytes, found {len(labels_raw)}")
    if n_img != n_lab:
        raise FormatError(f"image/label count mismatch: {n_img} images, {n_lab} labels")

    pixels = np.frombuffer(images_raw, dtype=np.uint8, offset=16)
    features = pixels.reshape(n_img, rows * cols).astype(np.float64) / 255.0
    labels = np.frombuffer(labels_raw, dtype=np.uint8, offset=8).astype(np.int64)
    if labels.size and labels.max() > 9:
        raise FormatError(f"{labels_path}: label byte > 9")
    return Dataset(features, labels, C=10, name="mnist")


def load_cifar10_bin(paths: list[str | Path]) -> Dataset:
    """Load CIFAR-10 binary batch files (3073-byte records, R/G/B planes)."""
    if not paths:
        raise InputError("no CIFAR batch files given")
    feature_parts: list[np.ndarray] = []
    label_parts: list[np.ndarray] = []
    for path in paths:
        raw = _read_bytes(path)
        if len(raw) == 0 or len(raw) % _CIFAR_RECORD != 0:
            raise FormatError(f"{path}: size {len(raw)} is not a positive multiple of {_CIFAR_RECORD}")
        records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, _CIFAR_RECORD)
        labels = records[:, 0]
        if labels.max() > 9:
            raise FormatError(f"{path}: label byte > 9")
        label_parts.append(labels.astype(np.int64))
        feature_parts.append(records[:, 1:].astype(np.float64) / 255.0)
    return Dataset(np.concatenate(feature_parts), np.concatenate(label_parts), C=10, name="cifar10")


def synth_blobs(cfg: SynthConfig) -> Dataset:
    """Deterministic isotropic Gaussian blobs, one per class.

    Class c is centered at 0.5 in every coordinate except axis c % d, which
    is offset by +-0.25 (sign flips on the second wrap around the axes), so
    means are distinct and samples stay near [0, 1]; values are clipped to
    the range afterwards.
    """
    rng = child_rng(cfg.seed)
    features = np.empty((cfg.C * cfg.per_class, cfg.d), dtype=np.float64)
    labels = np.empty(cfg.C * cfg.per_class, dtype=np.int64)
    for c in range(cfg.C):
        mean = np.full(cfg.d, 0.5)
        mean[c % cfg.d] += 0.25 if c < cfg.d else -0.25
        rows = slice(c * cfg.per_class, (c + 1) * cfg.per_class)
        features[rows] = rng.normal(mean, cfg.spread, size=(cfg.per_class, cfg.d))
        labels[rows] = c
    np.clip(features, 0.0, 1.0, out=features)
    name = f"synth-c{cfg.C}-n{cfg.per_class}-d{cfg.d}"
    return Dataset(features, labels, C=cfg.C, name=name)


def _read_bytes(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc


def _unpack_header(raw: bytes, layout: str, path: str | Path) -> tuple[int, ...]:
    size = struct.calcsize(layout)
    if len(raw) < size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    return struct.unpack_from(layout, raw)
