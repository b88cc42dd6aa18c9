"""Command line front end: partition, train, metrics, report.

Exit codes: 0 on success, 1 on any domain error (bad file, bad config,
fingerprint mismatch), 2 on command line usage errors (from argparse).

Option precedence for `train`: command line flag, then --config JSON file,
then built-in default. The output directory additionally honors the
FEDIMB_OUT_DIR environment variable (between flag and config file).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import metrics as im
from .data import Dataset, SynthConfig, load_cifar10_bin, load_mnist_idx, synth_blobs
from .errors import ConfigError, FedimbError, FormatError, InputError
from .fedavg import FLConfig, RoundLog, run_experiment
from .models import ModelSpec
from .partition import ScenarioConfig, build_partition, parse_plan, serialize_plan

_TRAIN_DEFAULTS: dict[str, object] = {
    "rounds": 50,
    "clients_per_round": 10,
    "local_epochs": 5,
    "batch_size": 128,
    "local_lr": 0.1,
    "server_lr": 1.0,
    "seed": 0,
    "repetitions": 3,
    "threads": 1,
    "model": "logistic",
    "hidden": 32,
    "init_seed": 0,
    "out_dir": "runs",
}

MNIST_TRAIN = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
MNIST_TEST = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")
CIFAR_TRAIN = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST = ("test_batch.bin",)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FedimbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedimb",
        description="Class-imbalance partition plans and federated averaging runs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="build a client partition plan")
    p.add_argument("--scenario", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--clients", type=int, required=True, metavar="P")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=None,
                   help="minority downsampling ratio (scenarios 2 and 4)")
    p.add_argument("--minority", default=None, metavar="IDS",
                   help="comma separated minority class ids (default 0,1,3,6)")
    p.add_argument("--local-classes", type=int, default=None, metavar="S",
                   help="distinct classes per client (scenarios 3 and 4)")
    p.add_argument("--selection", choices=("balanced", "random"), default="balanced")
    _add_dataset_args(p)
    p.add_argument("--out", type=Path, default=None, help="write the plan JSON here")
    p.set_defaults(func=_cmd_partition)

    p = sub.add_parser("metrics", help="print imbalance metrics")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--plan", type=Path, help="plan JSON produced by `partition`")
    src.add_argument("--counts", type=Path,
                     help="JSON file with per-client label count vectors")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("train", help="run federated averaging over a plan")
    p.add_argument("--plan", type=Path, required=True)
    _add_dataset_args(p)
    p.add_argument("--synth-test-per-class", type=int, default=200)
    p.add_argument("--model", choices=("logistic", "mlp"), default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--init-seed", type=int, default=None)
    p.add_argument("--rounds", type=int, default=None)
    p.add_argument("--clients-per-round", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None, dest="local_epochs")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None, dest="local_lr")
    p.add_argument("--server-lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--repetitions", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--config", type=Path, default=None, help="JSON config file")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("report", help="summarize train output directories")
    p.add_argument("runs", nargs="*", type=Path, help="run directories from `train`")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=_cmd_report)
    return parser


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", choices=("synth", "mnist", "cifar10"), default="synth")
    p.add_argument("--data-dir", type=Path, default=Path("data"))
    p.add_argument("--synth-classes", type=int, default=10)
    p.add_argument("--synth-per-class", type=int, default=500)
    p.add_argument("--synth-d", type=int, default=16)
    p.add_argument("--synth-spread", type=float, default=0.1)
    p.add_argument("--synth-seed", type=int, default=11)


def _load_train_dataset(args: argparse.Namespace) -> Dataset:
    if args.dataset == "synth":
        return synth_blobs(_synth_config(args))
    if args.dataset == "mnist":
        return load_mnist_idx(args.data_dir / MNIST_TRAIN[0], args.data_dir / MNIST_TRAIN[1])
    return load_cifar10_bin([args.data_dir / name for name in CIFAR_TRAIN])


def _load_test_dataset(args: argparse.Namespace) -> Dataset:
    if args.dataset == "synth":
        cfg = _synth_config(args)
        return synth_blobs(replace(cfg, per_class=args.synth_test_per_class,
                                   seed=cfg.seed + 1))
    if args.dataset == "mnist":
        return load_mnist_idx(args.data_dir / MNIST_TEST[0], args.data_dir / MNIST_TEST[1])
    return load_cifar10_bin([args.data_dir / name for name in CIFAR_TEST])


def _synth_config(args: argparse.Namespace) -> SynthConfig:
    return SynthConfig(C=args.synth_classes, per_class=args.synth_per_class,
                       d=args.synth_d, spread=args.synth_spread, seed=args.synth_seed)


def _print_metric_lines(gamma: float, values: dict[str, float]) -> None:
    print(f"gamma {'inf' if math.isinf(gamma) else format(gamma, '.6f')}")
    for name, v in values.items():
        print(f"{name} {v:.6f}")


def _cmd_partition(args: argparse.Namespace) -> int:
    dataset = _load_train_dataset(args)
    minority = None
    if args.minority is not None:
        try:
            minority = frozenset(int(tok) for tok in args.minority.split(","))
        except ValueError:
            raise ConfigError(f"--minority must be comma separated integers, got {args.minority!r}")
    cfg = ScenarioConfig(scenario=args.scenario, P=args.clients, seed=args.seed,
                         gamma=args.gamma, minority_classes=minority,
                         S=args.local_classes, selection=args.selection)
    plan = build_partition(dataset, cfg)
    print(f"dataset {plan.dataset_name}")
    print(f"samples {plan.dataset_n}")
    print(f"classes {plan.dataset_C}")
    print(f"clients {cfg.P}")
    m = plan.metrics
    _print_metric_lines(m.gamma, {"lrid": m.lrid, "mid": m.mid, "mcs": m.mcs, "wcs": m.wcs})
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_bytes(serialize_plan(plan))
        print(f"wrote {args.out}")
    return 0


def _cmd_metrics(args: argparse.Namespace) -> int:
    if args.plan is not None:
        plan = parse_plan(args.plan.read_bytes())
        m = plan.metrics
        _print_metric_lines(m.gamma, {"lrid": m.lrid, "mid": m.mid, "mcs": m.mcs, "wcs": m.wcs})
        return 0
    try:
        doc = json.loads(args.counts.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{args.counts}: not valid JSON: {exc}") from exc
    if (not isinstance(doc, list) or not doc
            or not all(isinstance(row, list) for row in doc)):
        raise FormatError(f"{args.counts}: expected a non-empty list of count vectors")
    try:
        dists = [im.LabelDistribution(np.asarray(row, dtype=np.int64)) for row in doc]
    except (InputError, ValueError, TypeError) as exc:
        raise FormatError(f"{args.counts}: {exc}") from exc
    if len({d.C for d in dists}) != 1:
        raise FormatError(f"{args.counts}: count vectors must share one length")
    overall = im.global_distribution(dists)
    _print_metric_lines(im.imbalance_ratio(overall), {
        "lrid": im.lrid(overall),
        "mid": im.mid(overall),
        "mcs": im.mcs(dists),
        "wcs": im.wcs(dists),
    })
    return 0


def _resolve_train_options(args: argparse.Namespace) -> dict[str, object]:
    from_file: dict[str, object] = {}
    if args.config is not None:
        try:
            loaded = json.loads(args.config.read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{args.config}: not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise FormatError(f"{args.config}: config must be a JSON object")
        unknown = sorted(set(loaded) - set(_TRAIN_DEFAULTS))
        if unknown:
            raise ConfigError(f"{args.config}: unknown config keys {unknown}")
        from_file = loaded

    merged: dict[str, object] = {}
    for name, default in _TRAIN_DEFAULTS.items():
        flag = getattr(args, name, None)
        if flag is not None:
            merged[name] = flag
        elif name in from_file:
            merged[name] = from_file[name]
        else:
            merged[name] = default
    # env override sits between the flag and the config file
    if args.out_dir is None and os.environ.get("FEDIMB_OUT_DIR"):
        merged["out_dir"] = os.environ["FEDIMB_OUT_DIR"]

    for name in ("rounds", "clients_per_round", "local_epochs", "batch_size",
                 "seed", "repetitions", "threads", "hidden", "init_seed"):
        if not isinstance(merged[name], int) or isinstance(merged[name], bool):
            raise ConfigError(f"{name} must be an integer, got {merged[name]!r}")
    for name in ("local_lr", "server_lr"):
        if not isinstance(merged[name], (int, float)) or isinstance(merged[name], bool):
            raise ConfigError(f"{name} must be a number, got {merged[name]!r}")
    if merged["model"] not in ("logistic", "mlp"):
        raise ConfigError(f"model must be 'logistic' or 'mlp', got {merged['model']!r}")
    if not isinstance(merged["out_dir"], (str, Path)):
        raise ConfigError(f"out_dir must be a string, got {merged['out_dir']!r}")
    if merged["repetitions"] < 1:
        raise ConfigError(f"repetitions must be >= 1, got {merged['repetitions']}")
    if merged["threads"] < 1:
        raise ConfigError(f"threads must be >= 1, got {merged['threads']}")
    return merged


def _cmd_train(args: argparse.Namespace) -> int:
    opts = _resolve_train_options(args)
    plan = parse_plan(args.plan.read_bytes())
    train = _load_train_dataset(args)
    test = _load_test_dataset(args)
    out_dir = Path(str(opts["out_dir"]))
    out_dir.mkdir(parents=True, exist_ok=True)

    hidden = int(opts["hidden"]) if opts["model"] == "mlp" else None
    started = time.monotonic()
    finals: list[dict[str, float]] = []
    reps = int(opts["repetitions"])
    for r in range(reps):
        spec = ModelSpec(kind=str(opts["model"]), input_dim=train.d, C=train.C,
                         hidden_dim=hidden, init_seed=int(opts["init_seed"]) + r)
        fl = FLConfig(rounds=int(opts["rounds"]),
                      clients_per_round=int(opts["clients_per_round"]),
                      local_epochs=int(opts["local_epochs"]),
                      batch_size=int(opts["batch_size"]),
                      local_lr=float(opts["local_lr"]),
                      server_lr=float(opts["server_lr"]),
                      seed=int(opts["seed"]) + r)

        def _progress(log: RoundLog, r: int = r, total: int = fl.rounds) -> None:
            print(f"rep {r} round {log.round}/{total} "
                  f"acc {log.accuracy:.4f} f1 {log.macro_f1:.4f} "
                  f"loss {log.mean_local_loss:.4f}", file=sys.stderr)

        logs, final = run_experiment(train, test, plan, spec, fl,
                                     threads=int(opts["threads"]), progress=_progress)
        _write_round_csv(out_dir / f"rep{r}.csv", logs, train.C)
        finals.append({"seed": fl.seed, "init_seed": spec.init_seed,
                       "accuracy": final.accuracy, "macro_f1": final.macro_f1})

    acc = np.array([f["accuracy"] for f in finals])
    f1 = np.array([f["macro_f1"] for f in finals])
    pm = plan.metrics
    summary = {
        "dataset": plan.dataset_name,
        "scenario": plan.config.scenario,
        "clients": plan.config.P,
        "plan_metrics": {
            "gamma": "inf" if math.isinf(pm.gamma) else pm.gamma,
            "lrid": pm.lrid, "mid": pm.mid, "mcs": pm.mcs, "wcs": pm.wcs,
        },
        "config": {k: (str(v) if k == "out_dir" else v) for k, v in opts.items()},
        "repetitions": finals,
        "final_accuracy_mean": float(acc.mean()),
        "final_accuracy_std": float(acc.std()),
        "final_macro_f1_mean": float(f1.mean()),
        "final_macro_f1_std": float(f1.std()),
        "runtime_seconds": time.monotonic() - started,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out_dir / 'summary.json'} "
          f"(accuracy {summary['final_accuracy_mean']:.4f} "
          f"+- {summary['final_accuracy_std']:.4f} over {reps} repetitions)")
    return 0


def _write_round_csv(path: Path, logs: list[RoundLog], C: int) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "accuracy", "macro_f1", "mean_local_loss"]
                        + [f"recall_{c}" for c in range(C)])
        for log in logs:
            writer.writerow([log.round, repr(log.accuracy), repr(log.macro_f1),
                             repr(log.mean_local_loss)]
                            + [repr(float(v)) for v in log.recalls])


def _cmd_report(args: argparse.Namespace) -> int:
    if not args.runs:
        raise InputError("report needs at least one run directory")
    out_dir = Path(args.out_dir if args.out_dir is not None
                   else os.environ.get("FEDIMB_OUT_DIR") or "report")

    rows = []
    curves = []
    for run_dir in args.runs:
        summary_path = run_dir / "summary.json"
        try:
            summary = json.loads(summary_path.read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{summary_path}: not valid JSON: {exc}") from exc
        try:
            pm = summary["plan_metrics"]
            rows.append({
                "run": run_dir.name,
                "dataset": summary["dataset"],
                "scenario": int(summary["scenario"]),
                "gamma": math.inf if pm["gamma"] == "inf" else float(pm["gamma"]),
                "mid": float(pm["mid"]),
                "wcs": float(pm["wcs"]),
                "accuracy_mean": float(summary["final_accuracy_mean"]),
                "accuracy_std": float(summary["final_accuracy_std"]),
                "macro_f1_mean": float(summary["final_macro_f1_mean"]),
                "macro_f1_std": float(summary["final_macro_f1_std"]),
            })
            reps_count = len(summary["repetitions"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{summary_path}: missing or malformed field: {exc}") from exc
        for rep_index in range(reps_count):
            rep_path = run_dir / f"rep{rep_index}.csv"
            try:
                with open(rep_path, newline="") as fh:
                    for record in csv.DictReader(fh):
                        curves.append((run_dir.name, int(record["round"]), rep_index,
                                       float(record["accuracy"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{rep_path}: malformed round log: {exc}") from exc

    rows.sort(key=lambda r: (r["dataset"], r["scenario"], r["mid"], -r["wcs"]))
    out_dir.mkdir(parents=True, exist_ok=True)

    table_path = out_dir / "summary_table.csv"
    fields = ["run", "dataset", "scenario", "gamma", "mid", "wcs",
              "accuracy_mean", "accuracy_std", "macro_f1_mean", "macro_f1_std"]
    with open(table_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            out["gamma"] = "inf" if math.isinf(row["gamma"]) else row["gamma"]
            writer.writerow(out)

    curves_path = out_dir / "curves.csv"
    curves.sort(key=lambda c: (c[0], c[2], c[1]))
    with open(curves_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "round", "repetition", "accuracy"])
        for run, rnd, rep_index, accuracy in curves:
            writer.writerow([run, rnd, rep_index, repr(accuracy)])

    for row in rows:
        print(f"{row['run']}: dataset={row['dataset']} scenario={row['scenario']} "
              f"mid={row['mid']:.4f} wcs={row['wcs']:.4f} "
              f"accuracy={row['accuracy_mean']:.4f}+-{row['accuracy_std']:.4f}")
    print(f"wrote {table_path} and {curves_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
