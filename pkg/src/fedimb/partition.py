"""Deterministic client partition plans for the four imbalance scenarios.

Scenario semantics (all driven by one seed; see `streams` for the stream map):

1. balanced: every class split evenly across all P clients.
2. globally imbalanced: minority classes downsampled to 1/gamma, then the
   scenario-1 split. Every client keeps the same class mixture, so the
   local/global mismatch (WCS) stays exactly 1.
3. locally skewed: each client holds S distinct classes; a class's samples
   are split evenly among the clients that selected it (earlier-numbered
   clients absorb remainders). Global balance is preserved by a seeded
   balanced selection design; fully random selection is opt-in.
4. both: downsample as in 2, then assign as in 3.

For scenarios 1-2 each client receives exactly floor(n_c / P) samples of
class c: per-class remainders stay unassigned, keeping all local label
vectors parallel to the global one (WCS stays exactly 1). Scenarios 3-4
assign every retained sample of a selected class. All plan metrics, global
(gamma, LRID, MID) and local (MCS, WCS), are computed over the union of
assigned samples, i.e. the sum of the per-client label distributions.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import metrics as im
from .data import Dataset
from .errors import ConfigError, FormatError, InputError, IntegrityError
from .streams import TAG_DOWNSAMPLE, TAG_SELECTION, TAG_SPLIT, child_rng

PLAN_VERSION = 1
DEFAULT_MINORITY = frozenset({0, 1, 3, 6})
SELECTION_MODES = ("balanced", "random")


@dataclass(frozen=True)
class ScenarioConfig:
    """One Table-1 row: which scenario to build and its knobs."""

    scenario: int
    P: int
    seed: int
    gamma: float | None = None                       # scenarios 2, 4
    minority_classes: frozenset[int] | None = None   # scenarios 2, 4
    S: int | None = None                             # scenarios 3, 4
    selection: str = "balanced"                      # scenarios 3, 4

    def __post_init__(self) -> None:
        if self.scenario not in (1, 2, 3, 4):
            raise ConfigError(f"scenario must be 1-4, got {self.scenario}")
        if self.P < 1:
            raise ConfigError(f"P must be >= 1, got {self.P}")
        if self.selection not in SELECTION_MODES:
            raise ConfigError(f"selection must be one of {SELECTION_MODES}")
        if self.scenario in (2, 4):
            if self.gamma is None:
                raise ConfigError(f"scenario {self.scenario} requires gamma")
            object.__setattr__(self, "gamma", float(self.gamma))
            if not self.gamma >= 1.0:
                raise ConfigError(f"gamma must be >= 1, got {self.gamma}")
            if self.minority_classes is not None:
                object.__setattr__(self, "minority_classes",
                                   frozenset(int(c) for c in self.minority_classes))
        elif self.gamma is not None or self.minority_classes is not None:
            raise ConfigError("gamma/minority_classes only apply to scenarios 2 and 4")
        if self.scenario in (3, 4):
            if self.S is None or self.S < 1:
                raise ConfigError(f"scenario {self.scenario} requires S >= 1")
        elif self.S is not None:
            raise ConfigError("S only applies to scenarios 3 and 4")


@dataclass(eq=False)
class PartitionPlan:
    """A certified client->sample assignment for one dataset."""

    dataset_name: str
    dataset_n: int
    dataset_C: int
    dataset_sha256: str
    config: ScenarioConfig
    assignments: list[np.ndarray]
    metrics: im.MetricReport
    per_client: list[im.LabelDistribution]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PartitionPlan):
            return NotImplemented
        return (
            (self.dataset_name, self.dataset_n, self.dataset_C, self.dataset_sha256,
             self.config, self.metrics) ==
            (other.dataset_name, other.dataset_n, other.dataset_C, other.dataset_sha256,
             other.config, other.metrics)
            and len(self.assignments) == len(other.assignments)
            and all(np.array_equal(a, b) for a, b in zip(self.assignments, other.assignments))
            and all(np.array_equal(a.counts, b.counts)
                    for a, b in zip(self.per_client, other.per_client))
        )


def downsample_minority(dataset: Dataset, minority: frozenset[int] | set[int],
                        gamma: float, seed: int) -> np.ndarray:
    """Indices kept after reducing each minority class to floor(n_c/gamma).

    Keeps at least one sample per minority class and every sample of the
    other classes; uniform without replacement, deterministic given seed.
    """
    if not gamma >= 1.0:
        raise ConfigError(f"gamma must be >= 1, got {gamma}")
    per_class = _class_indices(dataset.labels, dataset.C)
    for c in minority:
        if not 0 <= c < dataset.C:
            raise ConfigError(f"minority class {c} outside [0, {dataset.C})")
        if per_class[c].size == 0:
            raise ConfigError(f"minority class {c} absent from dataset")
    kept = _downsampled_classes(per_class, minority, gamma, seed)
    return np.sort(np.concatenate(kept))


def build_partition(dataset: Dataset, cfg: ScenarioConfig) -> PartitionPlan:
    """Materialize one scenario into assignments plus certified metrics."""
    if dataset.n == 0:
        raise InputError("empty dataset")
    _check_classes(cfg, dataset.C)
    kept, selectors = _retained(dataset.labels, dataset.C, cfg)
    assignments = _assign(kept, selectors, cfg)

    for k, idx in enumerate(assignments):
        if idx.size == 0:
            raise ConfigError(f"client {k} received no samples; lower P or raise per-class counts")

    per_client = [im.label_distribution(dataset.labels[idx], dataset.C) for idx in assignments]
    report = _report(per_client)
    return PartitionPlan(
        dataset_name=dataset.name,
        dataset_n=dataset.n,
        dataset_C=dataset.C,
        dataset_sha256=dataset.sha256(),
        config=cfg,
        assignments=assignments,
        metrics=report,
        per_client=per_client,
    )


def plan_metrics(plan: PartitionPlan, dataset: Dataset) -> im.MetricReport:
    """Recompute the plan's certified metrics from the dataset.

    Everything is derived from the stored assignments: per-client label
    distributions give WCS/MCS, their sum (the union of assigned samples)
    gives gamma/LRID/MID. Must equal plan.metrics for an untampered plan.
    """
    if (plan.dataset_sha256 != dataset.sha256() or plan.dataset_n != dataset.n
            or plan.dataset_C != dataset.C):
        raise IntegrityError(
            f"plan was built for {plan.dataset_name} (n={plan.dataset_n}, "
            f"sha256={plan.dataset_sha256[:12]}...), got {dataset.name} "
            f"(n={dataset.n}, sha256={dataset.sha256()[:12]}...)")
    for idx in plan.assignments:
        if idx.size and (idx.min() < 0 or idx.max() >= dataset.n):
            raise IntegrityError("assignment index outside dataset")
    per_client = [im.label_distribution(dataset.labels[idx], dataset.C)
                  for idx in plan.assignments]
    return _report(per_client)


def serialize_plan(plan: PartitionPlan) -> bytes:
    """Canonical JSON bytes: sorted keys, no insignificant whitespace."""
    cfg = plan.config
    doc = {
        "version": PLAN_VERSION,
        "dataset": {
            "name": plan.dataset_name,
            "n": plan.dataset_n,
            "C": plan.dataset_C,
            "sha256": plan.dataset_sha256,
        },
        "config": {
            "scenario": cfg.scenario,
            "P": cfg.P,
            "seed": cfg.seed,
            "gamma": cfg.gamma,
            "minority_classes": sorted(cfg.minority_classes) if cfg.minority_classes is not None else None,
            "S": cfg.S,
            "selection": cfg.selection,
        },
        "assignments": [idx.tolist() for idx in plan.assignments],
        "metrics": {
            "gamma": "inf" if math.isinf(plan.metrics.gamma) else plan.metrics.gamma,
            "lrid": plan.metrics.lrid,
            "mid": plan.metrics.mid,
            "mcs": plan.metrics.mcs,
            "wcs": plan.metrics.wcs,
        },
        "per_client_counts": [d.counts.tolist() for d in plan.per_client],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def parse_plan(raw: bytes) -> PartitionPlan:
    """Parse and validate canonical plan JSON (inverse of serialize_plan)."""
    try:
        doc = json.loads(raw)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"plan is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("plan document must be a JSON object")
    _require_keys(doc, {"version", "dataset", "config", "assignments", "metrics",
                        "per_client_counts"}, "plan")
    if doc["version"] != PLAN_VERSION:
        raise FormatError(f"unsupported plan version {doc['version']!r}")

    ds = doc["dataset"]
    if not isinstance(ds, dict):
        raise FormatError("dataset field must be an object")
    _require_keys(ds, {"name", "n", "C", "sha256"}, "dataset")
    if not isinstance(ds["sha256"], str) or len(ds["sha256"]) != 64:
        raise FormatError("dataset fingerprint absent or malformed")

    cfg_doc = doc["config"]
    if not isinstance(cfg_doc, dict):
        raise FormatError("config field must be an object")
    _require_keys(cfg_doc, {"scenario", "P", "seed", "gamma", "minority_classes",
                            "S", "selection"}, "config")
    try:
        cfg = ScenarioConfig(
            scenario=cfg_doc["scenario"],
            P=cfg_doc["P"],
            seed=cfg_doc["seed"],
            gamma=cfg_doc["gamma"],
            minority_classes=(frozenset(cfg_doc["minority_classes"])
                              if cfg_doc["minority_classes"] is not None else None),
            S=cfg_doc["S"],
            selection=cfg_doc["selection"],
        )
    except (ConfigError, TypeError, ValueError) as exc:
        raise FormatError(f"invalid config in plan: {exc}") from exc

    n, C, P = ds["n"], ds["C"], cfg.P
    assignments_doc = doc["assignments"]
    counts_doc = doc["per_client_counts"]
    if not isinstance(assignments_doc, list) or len(assignments_doc) != P:
        raise FormatError(f"expected {P} assignment lists")
    if not isinstance(counts_doc, list) or len(counts_doc) != P:
        raise FormatError(f"expected {P} per-client count vectors")

    assignments: list[np.ndarray] = []
    seen = 0
    for k, lst in enumerate(assignments_doc):
        if not isinstance(lst, list) or not lst:
            raise FormatError(f"client {k}: assignment must be a non-empty list")
        idx = np.asarray(lst, dtype=np.int64)
        if idx.min() < 0 or idx.max() >= n:
            raise FormatError(f"client {k}: assignment index outside [0, {n})")
        if np.any(np.diff(idx) <= 0):
            raise FormatError(f"client {k}: assignment must be strictly increasing")
        assignments.append(idx)
        seen += idx.size
    union = np.concatenate(assignments)
    if np.unique(union).size != seen:
        raise FormatError("assignments overlap")

    per_client: list[im.LabelDistribution] = []
    for k, counts in enumerate(counts_doc):
        if not isinstance(counts, list) or len(counts) != C:
            raise FormatError(f"client {k}: per-client counts must have length {C}")
        try:
            dist = im.LabelDistribution(np.asarray(counts, dtype=np.int64))
        except InputError as exc:
            raise FormatError(f"client {k}: {exc}") from exc
        if dist.N != assignments[k].size:
            raise FormatError(f"client {k}: counts sum to {dist.N}, assignment has {assignments[k].size}")
        per_client.append(dist)

    md = doc["metrics"]
    if not isinstance(md, dict):
        raise FormatError("metrics field must be an object")
    _require_keys(md, {"gamma", "lrid", "mid", "mcs", "wcs"}, "metrics")
    gamma = math.inf if md["gamma"] == "inf" else md["gamma"]
    try:
        report = im.MetricReport(gamma=float(gamma), lrid=float(md["lrid"]), mid=float(md["mid"]),
                                 mcs=float(md["mcs"]), wcs=float(md["wcs"]))
    except (InputError, TypeError, ValueError) as exc:
        raise FormatError(f"invalid metrics in plan: {exc}") from exc

    return PartitionPlan(
        dataset_name=ds["name"], dataset_n=n, dataset_C=C, dataset_sha256=ds["sha256"],
        config=cfg, assignments=assignments, metrics=report, per_client=per_client,
    )


# -- internals ---------------------------------------------------------------

def _require_keys(doc: dict, expected: set[str], where: str) -> None:
    got = set(doc)
    if got != expected:
        missing = sorted(expected - got)
        unknown = sorted(got - expected)
        detail = []
        if missing:
            detail.append(f"missing {missing}")
        if unknown:
            detail.append(f"unknown {unknown}")
        raise FormatError(f"{where}: {', '.join(detail)}")


def _class_indices(labels: np.ndarray, C: int) -> list[np.ndarray]:
    return [np.flatnonzero(labels == c) for c in range(C)]


def _downsampled_classes(per_class: list[np.ndarray], minority: frozenset[int] | set[int],
                         gamma: float, seed: int) -> list[np.ndarray]:
    kept = []
    for c, idx in enumerate(per_class):
        if c in minority and gamma > 1.0:
            keep = max(int(idx.size // gamma), 1)
            rng = child_rng(seed, TAG_DOWNSAMPLE, c)
            kept.append(np.sort(rng.permutation(idx)[:keep]))
        else:
            kept.append(idx)
    return kept


def _check_classes(cfg: ScenarioConfig, C: int) -> None:
    if cfg.scenario in (2, 4):
        minority = cfg.minority_classes if cfg.minority_classes is not None else DEFAULT_MINORITY
        if not all(0 <= c < C for c in minority):
            raise ConfigError(f"minority classes {sorted(minority)} outside [0, {C})")
    if cfg.scenario in (3, 4) and cfg.S > C:
        raise ConfigError(f"S={cfg.S} exceeds C={C}")


def _retained(labels: np.ndarray, C: int, cfg: ScenarioConfig
              ) -> tuple[list[np.ndarray], list[np.ndarray] | None]:
    """Per-class retained indices, plus per-class selecting clients (scenarios 3/4)."""
    per_class = _class_indices(labels, C)
    if cfg.scenario in (2, 4):
        minority = cfg.minority_classes if cfg.minority_classes is not None else DEFAULT_MINORITY
        for c in minority:
            if per_class[c].size == 0:
                raise ConfigError(f"minority class {c} absent from dataset")
        kept = _downsampled_classes(per_class, minority, cfg.gamma, cfg.seed)
    else:
        kept = per_class

    if cfg.scenario in (1, 2):
        return kept, None

    selectors = _select_classes(cfg, C)
    kept = [idx if selectors[c].size else idx[:0] for c, idx in enumerate(kept)]
    return kept, selectors


def _select_classes(cfg: ScenarioConfig, C: int) -> list[np.ndarray]:
    """Per-class sorted client ids that hold the class (scenarios 3/4)."""
    rng = child_rng(cfg.seed, TAG_SELECTION)
    chosen: list[list[int]] = [[] for _ in range(C)]
    if cfg.selection == "balanced":
        if cfg.P * cfg.S < C:
            raise ConfigError(
                f"P*S = {cfg.P * cfg.S} < C = {C}: balanced selection cannot cover every class")
        # cyclic design, randomized by a class relabeling and a client shuffle;
        # each class is picked by P*S/C clients (+-1 when C does not divide P*S)
        relabel = rng.permutation(C)
        order = rng.permutation(cfg.P)
        for i in range(cfg.P):
            for j in range(cfg.S):
                chosen[relabel[(i * cfg.S + j) % C]].append(int(order[i]))
    else:
        for client in range(cfg.P):
            for c in rng.choice(C, size=cfg.S, replace=False):
                chosen[c].append(client)
    return [np.sort(np.asarray(ids, dtype=np.int64)) for ids in chosen]


def _assign(kept: list[np.ndarray], selectors: list[np.ndarray] | None,
            cfg: ScenarioConfig) -> list[np.ndarray]:
    parts: list[list[np.ndarray]] = [[] for _ in range(cfg.P)]
    for c, idx in enumerate(kept):
        if idx.size == 0:
            continue
        shuffled = child_rng(cfg.seed, TAG_SPLIT, c).permutation(idx)
        if selectors is None:
            # scenarios 1-2: identical per-client quota, remainder unassigned
            quota = idx.size // cfg.P
            if quota == 0:
                warnings.warn(
                    f"class {c} has {idx.size} retained samples for P={cfg.P} clients; "
                    "it is dropped from every client", stacklevel=3)
                continue
            for k in range(cfg.P):
                parts[k].append(shuffled[k * quota : (k + 1) * quota])
        else:
            takers = selectors[c]
            quota, extra = divmod(idx.size, takers.size)
            if quota == 0:
                raise ConfigError(
                    f"class {c} has {idx.size} retained samples for {takers.size} selecting clients")
            start = 0
            for rank, k in enumerate(takers):
                take = quota + (1 if rank < extra else 0)
                parts[int(k)].append(shuffled[start : start + take])
                start += take
    return [np.sort(np.concatenate(p)) if p else np.empty(0, dtype=np.int64) for p in parts]


def _report(per_client: list[im.LabelDistribution]) -> im.MetricReport:
    union = im.global_distribution(per_client)
    return im.MetricReport(
        gamma=im.imbalance_ratio(union),
        lrid=im.lrid(union),
        mid=im.mid(union),
        mcs=im.mcs(per_client),
        wcs=im.wcs(per_client),
    )
