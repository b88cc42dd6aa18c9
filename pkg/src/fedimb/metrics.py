"""Class-imbalance measures over label distributions.

A federation is described by one label-count vector per client; the global
vector is their elementwise sum. Two families of measures are computed here:

* global imbalance: the majority/minority ratio, LRID (a sample-size-scaled
  KL divergence from the uniform distribution), and MID (LRID normalized by
  its extreme value, size-invariant and in [0, 1]);
* local/global mismatch: plain, mean, and size-weighted cosine similarity
  between local vectors and the global vector (MCS, WCS).

All functions are pure and operate in double precision. Summation runs in
class-index order; the class counts handled here are far too small for
compensated summation to matter.
"""
from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class LabelDistribution:
    """Per-class sample counts of one dataset or one client.

    counts must be a length-C vector of non-negative integers, C >= 2.
    N may be 0 only for an explicitly empty distribution.
    """

    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.shape[0] < 2:
            raise InputError(f"counts must be a vector of length >= 2, got shape {counts.shape}")
        if np.any(counts < 0):
            raise InputError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def C(self) -> int:
        return int(self.counts.shape[0])

    @property
    def N(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class MetricReport:
    """The metric columns certified for one partition plan."""

    gamma: float  # majority/minority count ratio, +inf if a class is absent
    lrid: float
    mid: float
    mcs: float
    wcs: float

    def __post_init__(self) -> None:
        if not self.gamma >= 1.0:  # +inf passes, nan does not
            raise InputError(f"gamma out of range: {self.gamma}")
        if not (self.lrid >= 0.0 and 0.0 <= self.mid <= 1.0):
            raise InputError(f"lrid/mid out of range: {self.lrid}, {self.mid}")
        if not (0.0 <= self.mcs <= 1.0 and 0.0 <= self.wcs <= 1.0):
            raise InputError(f"mcs/wcs out of range: {self.mcs}, {self.wcs}")


def label_distribution(labels: Sequence[int] | np.ndarray, C: int) -> LabelDistribution:
    """Count labels into a length-C distribution.

    Args:
        labels: integer labels, each in [0, C). May be empty.
        C: number of classes, >= 2.

    Returns:
        LabelDistribution with counts[c] = occurrences of c.
    """
    if C < 2:
        raise InputError(f"C must be >= 2, got {C}")
    arr = np.asarray(labels, dtype=np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= C):
        raise InputError(f"labels outside [0, {C})")
    return LabelDistribution(np.bincount(arr, minlength=C))


def imbalance_ratio(d: LabelDistribution) -> float:
    """Majority count over minority count; +inf if some class is empty."""
    _require_nonempty(d)
    lo = int(d.counts.min())
    hi = int(d.counts.max())
    if lo == 0:
        return math.inf
    return hi / lo


def lrid(d: LabelDistribution) -> float:
    """Likelihood-ratio imbalance degree: 2 * sum_c n_c * ln(C * n_c / N).

    Zero-count classes contribute 0 (the 0 * ln 0 convention). The value is
    0 exactly iff all counts are equal, and grows linearly with dataset size
    for a fixed class mixture.
    """
    _require_nonempty(d)
    counts = d.counts.astype(np.float64)
    n_total = float(d.N)
    nonzero = counts[counts > 0.0]
    # C*n_c and N are exact integers in float64, so uniform counts give ln(1) == 0 exactly
    total = float(np.sum(nonzero * np.log(nonzero * d.C / n_total)))
    return max(2.0 * total, 0.0)


def mid(d: LabelDistribution) -> float:
    """Multiclass imbalance degree: lrid / (2 * N * ln C), in [0, 1].

    Equals KL(empirical || uniform) / ln C; 0 iff uniform, 1 iff a single
    class holds every sample.
    """
    _require_nonempty(d)
    # same log implementation as lrid, so the single-class case is exactly 1
    value = lrid(d) / (2.0 * d.N * float(np.log(np.float64(d.C))))
    return min(max(value, 0.0), 1.0)


def cosine_similarity(a: LabelDistribution, b: LabelDistribution) -> float:
    """Cosine of the angle between two count vectors, in [0, 1]."""
    if a.C != b.C:
        raise InputError(f"class counts differ: {a.C} != {b.C}")
    _require_nonempty(a)
    _require_nonempty(b)
    return _cosine(a.counts.astype(np.float64), b.counts.astype(np.float64))


def global_distribution(locals_: Sequence[LabelDistribution]) -> LabelDistribution:
    """Elementwise sum of the local distributions."""
    if not locals_:
        raise InputError("at least one local distribution required")
    C = locals_[0].C
    for d in locals_:
        if d.C != C:
            raise InputError(f"class counts differ: {d.C} != {C}")
    total = np.zeros(C, dtype=np.int64)
    for d in locals_:
        total += d.counts
    return LabelDistribution(total)


def mcs(locals_: Sequence[LabelDistribution]) -> float:
    """Unweighted mean cosine similarity between each local vector and the global sum."""
    coss = _local_cosines(locals_)
    return float(np.mean(coss))


def wcs(locals_: Sequence[LabelDistribution]) -> float:
    """Size-weighted cosine similarity, in [||L||_2 / ||L||_1, 1].

    Each client's cosine to the global vector is weighted by its share of the
    total sample count. Equals 1 exactly iff every local vector is a positive
    multiple of the global one.
    """
    coss = _local_cosines(locals_)
    sizes = np.array([d.N for d in locals_], dtype=np.float64)
    # single division keeps the all-parallel case at exactly 1.0
    return float(np.dot(sizes, coss) / sizes.sum())


def _local_cosines(locals_: Sequence[LabelDistribution]) -> np.ndarray:
    total = global_distribution(locals_)
    if total.N == 0:
        raise InputError("all-empty federation")
    g = total.counts.astype(np.float64)
    coss = np.empty(len(locals_), dtype=np.float64)
    for i, d in enumerate(locals_):
        _require_nonempty(d)
        coss[i] = _cosine(g, d.counts.astype(np.float64))
    return coss


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    # dot/sqrt(dot*dot) keeps integer-parallel vectors at exactly 1.0
    value = float(np.dot(a, b) / math.sqrt(np.dot(a, a) * np.dot(b, b)))
    return min(max(value, 0.0), 1.0)


def _require_nonempty(d: LabelDistribution) -> None:
    if d.N == 0:
        raise InputError("empty distribution")
