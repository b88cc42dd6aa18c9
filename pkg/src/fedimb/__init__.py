"""Federated learning lab for class-imbalance experiments.

Quantifies label imbalance (ratio, info-divergence, cosine agreement),
builds deterministic client partition plans for four imbalance scenarios,
and runs federated averaging over them with reproducible seeding.
"""
from .backends import BACKEND_NAME, get_backend
from .data import Dataset, SynthConfig, load_cifar10_bin, load_mnist_idx, synth_blobs
from .errors import (ConfigError, FedimbError, FormatError, InputError,
                     IntegrityError, NumericError)
from .fedavg import (EvalReport, FLConfig, RoundLog, aggregate,
                     centralized_baseline, evaluate_global, local_train,
                     run_experiment, select_clients)
from .metrics import (LabelDistribution, MetricReport, cosine_similarity,
                      global_distribution, imbalance_ratio, label_distribution,
                      lrid, mcs, mid, wcs)
from .models import (ModelParams, ModelSpec, finite_diff, finite_diff_gradient,
                     gradient, init_params, load_params, loss, n_params,
                     predict, save_params, sgd_step)
from .partition import (PartitionPlan, ScenarioConfig, build_partition,
                        downsample_minority, parse_plan, plan_metrics,
                        serialize_plan)

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME", "get_backend",
    "Dataset", "SynthConfig", "load_cifar10_bin", "load_mnist_idx", "synth_blobs",
    "FedimbError", "ConfigError", "FormatError", "InputError",
    "IntegrityError", "NumericError",
    "EvalReport", "FLConfig", "RoundLog", "aggregate", "centralized_baseline",
    "evaluate_global", "local_train", "run_experiment", "select_clients",
    "LabelDistribution", "MetricReport", "cosine_similarity",
    "global_distribution", "imbalance_ratio", "label_distribution",
    "lrid", "mcs", "mid", "wcs",
    "ModelParams", "ModelSpec", "finite_diff", "finite_diff_gradient",
    "gradient", "init_params", "load_params", "loss", "n_params",
    "predict", "save_params", "sgd_step",
    "PartitionPlan", "ScenarioConfig", "build_partition", "downsample_minority",
    "parse_plan", "plan_metrics", "serialize_plan",
    "__version__",
]
