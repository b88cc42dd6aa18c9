import numpy as np
import pytest

from fedimb import (ConfigError, EvalReport, FLConfig, InputError,
                    IntegrityError, ModelParams, ModelSpec, ScenarioConfig,
                    SynthConfig, aggregate, build_partition,
                    centralized_baseline, evaluate_global, init_params,
                    local_train, loss, run_experiment, select_clients,
                    synth_blobs)

TINY_SPEC = ModelSpec("logistic", input_dim=1, C=2)


def tiny_params(fill=0.0):
    return ModelParams(np.full(4, fill), TINY_SPEC)


def small_sets(per_class=45, C=4, d=4, seed=21):
    train = synth_blobs(SynthConfig(C=C, per_class=per_class, d=d, spread=0.15, seed=seed))
    test = synth_blobs(SynthConfig(C=C, per_class=20, d=d, spread=0.15, seed=seed + 1))
    return train, test


def test_flconfig_validation():
    FLConfig(local_epochs=0)
    for bad in (dict(rounds=0), dict(clients_per_round=0), dict(local_epochs=-1),
                dict(batch_size=0), dict(local_lr=0.0), dict(server_lr=float("inf"))):
        with pytest.raises(ConfigError):
            FLConfig(**bad)


def test_select_clients():
    picked = select_clients(P=20, m=5, seed=3, round_index=1)
    assert picked.shape == (5,)
    assert np.all(np.diff(picked) > 0)
    assert picked.min() >= 0 and picked.max() < 20
    assert np.array_equal(picked, select_clients(20, 5, 3, 1))
    assert not np.array_equal(picked, select_clients(20, 5, 3, 2))
    assert select_clients(6, 6, 0, 1).tolist() == [0, 1, 2, 3, 4, 5]
    with pytest.raises(ConfigError):
        select_clients(4, 5, 0, 1)
    with pytest.raises(ConfigError):
        select_clients(4, 0, 0, 1)


def test_local_train_zero_epochs_is_identity():
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 1, (10, 1))
    y = rng.integers(0, 2, 10)
    params = init_params(TINY_SPEC)
    trained, reported = local_train(params, X, y, epochs=0, batch_size=4, lr=0.1,
                                    seed=0, round_index=1, client_id=0)
    assert np.array_equal(trained.values, params.values)
    assert trained.values is not params.values
    assert reported == loss(params, X, y)


def test_local_train_deterministic_per_stream():
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, (40, 1))
    y = rng.integers(0, 2, 40)
    params = init_params(TINY_SPEC)
    kw = dict(epochs=2, batch_size=8, lr=0.1, seed=7, round_index=3)
    a, la = local_train(params, X, y, client_id=2, **kw)
    b, lb = local_train(params, X, y, client_id=2, **kw)
    assert np.array_equal(a.values, b.values) and la == lb
    c, _ = local_train(params, X, y, client_id=4, **kw)
    assert not np.array_equal(a.values, c.values)
    assert not np.array_equal(a.values, params.values)  # input untouched


def test_aggregate_worked_example():
    w = tiny_params(0.0)
    updates = [(0, tiny_params(4.0), 1), (1, tiny_params(0.0), 3)]
    merged = aggregate(w, updates)
    assert merged.values.tolist() == [1.0, 1.0, 1.0, 1.0]
    damped = aggregate(w, updates, server_lr=0.5)
    assert damped.values.tolist() == [0.5, 0.5, 0.5, 0.5]


def test_aggregate_order_invariant():
    rng = np.random.default_rng(3)
    w = ModelParams(rng.normal(size=4), TINY_SPEC)
    updates = [(i, ModelParams(rng.normal(size=4), TINY_SPEC), int(rng.integers(1, 50)))
               for i in range(6)]
    merged = aggregate(w, updates)
    shuffled = [updates[i] for i in (4, 0, 5, 2, 1, 3)]
    assert np.array_equal(aggregate(w, shuffled).values, merged.values)


def test_aggregate_rejects_bad_updates():
    w = tiny_params()
    with pytest.raises(InputError, match="at least one"):
        aggregate(w, [])
    with pytest.raises(InputError, match="duplicate"):
        aggregate(w, [(1, tiny_params(), 2), (1, tiny_params(), 2)])
    with pytest.raises(InputError, match="n_samples"):
        aggregate(w, [(0, tiny_params(), 0)])
    other = ModelParams(np.zeros(6), ModelSpec("logistic", 2, 2))
    with pytest.raises(InputError, match="spec"):
        aggregate(w, [(0, other, 2)])


def test_evaluate_global_degenerate_predictor():
    # zero params predict class 0 for every row
    params = tiny_params(0.0)
    X = np.linspace(0, 1, 10).reshape(-1, 1)
    y = np.array([0] * 5 + [1] * 5)
    report = evaluate_global(params, X, y)
    assert report.accuracy == 0.5
    assert report.recall.tolist() == [1.0, 0.0]
    assert report.precision.tolist() == [0.5, 0.0]
    assert abs(report.macro_f1 - 1.0 / 3.0) < 1e-15
    assert report.confusion.tolist() == [[5, 0], [5, 0]]
    assert report == evaluate_global(params, X, y)


def run_small(threads, rounds=3, trace=None):
    train, test = small_sets()
    plan = build_partition(train, ScenarioConfig(scenario=1, P=5, seed=2))
    spec = ModelSpec("logistic", train.d, train.C, init_seed=4)
    cfg = FLConfig(rounds=rounds, clients_per_round=3, local_epochs=2,
                   batch_size=16, local_lr=0.2, seed=6)
    return run_experiment(train, test, plan, spec, cfg,
                          threads=threads, param_trace=trace)


def test_run_experiment_thread_count_invariant():
    trace1: list[np.ndarray] = []
    trace4: list[np.ndarray] = []
    logs1, final1 = run_small(threads=1, trace=trace1)
    logs4, final4 = run_small(threads=4, trace=trace4)
    assert [l.selected for l in logs1] == [l.selected for l in logs4]
    assert [l.accuracy for l in logs1] == [l.accuracy for l in logs4]
    assert [l.mean_local_loss for l in logs1] == [l.mean_local_loss for l in logs4]
    assert final1 == final4
    assert len(trace1) == len(logs1) == 3
    assert [l.round for l in logs1] == [1, 2, 3]
    for a, b in zip(trace1, trace4):
        assert np.array_equal(a, b)


def test_run_experiment_guards():
    train, test = small_sets()
    other = synth_blobs(SynthConfig(C=4, per_class=45, d=4, spread=0.15, seed=99))
    plan = build_partition(train, ScenarioConfig(scenario=1, P=5, seed=2))
    spec = ModelSpec("logistic", train.d, train.C)
    cfg = FLConfig(rounds=1, clients_per_round=3, local_epochs=1)
    with pytest.raises(IntegrityError, match="fingerprint"):
        run_experiment(other, test, plan, spec, cfg)
    with pytest.raises(ConfigError, match="exceeds"):
        run_experiment(train, test, plan, spec, FLConfig(rounds=1, clients_per_round=9))
    with pytest.raises(ConfigError, match="threads"):
        run_experiment(train, test, plan, spec, cfg, threads=0)
    with pytest.raises(ConfigError, match="model expects"):
        run_experiment(train, test, plan, ModelSpec("logistic", train.d + 1, train.C), cfg)
    bad_test = synth_blobs(SynthConfig(C=4, per_class=5, d=6, spread=0.15, seed=1))
    with pytest.raises(InputError, match="test set"):
        run_experiment(train, test=bad_test, plan=plan, spec=spec, cfg=cfg)


def test_run_experiment_zero_epochs_keeps_model_fixed():
    train, test = small_sets()
    plan = build_partition(train, ScenarioConfig(scenario=1, P=5, seed=2))
    spec = ModelSpec("logistic", train.d, train.C)
    cfg = FLConfig(rounds=2, clients_per_round=5, local_epochs=0)
    logs, final = run_experiment(train, test, plan, spec, cfg)
    assert logs[0].accuracy == logs[1].accuracy == final.accuracy


def test_centralized_baseline_shapes_and_determinism():
    train, test = small_sets()
    spec = ModelSpec("logistic", train.d, train.C, init_seed=1)
    trace: list[np.ndarray] = []
    reports = centralized_baseline(train, test, spec, steps=4, lr=0.1,
                                   batch_size=32, seed=5, param_trace=trace)
    assert len(reports) == 5
    assert len(trace) == 4
    first = evaluate_global(init_params(spec), test.features, test.labels)
    assert reports[0] == first
    again = centralized_baseline(train, test, spec, steps=4, lr=0.1, batch_size=32, seed=5)
    assert reports[-1] == again[-1]


def test_full_participation_single_batch_matches_centralized():
    # m = P, one local epoch, one full batch: FedAvg round == one pooled GD step
    train, test = small_sets(per_class=40, C=4)
    plan = build_partition(train, ScenarioConfig(scenario=1, P=5, seed=3))
    assert sum(idx.size for idx in plan.assignments) == train.n
    spec = ModelSpec("logistic", train.d, train.C, init_seed=8)
    cfg = FLConfig(rounds=3, clients_per_round=5, local_epochs=1,
                   batch_size=train.n, local_lr=0.2, seed=11)
    fed_trace: list[np.ndarray] = []
    run_experiment(train, test, plan, spec, cfg, param_trace=fed_trace)
    central_trace: list[np.ndarray] = []
    centralized_baseline(train, test, spec, steps=3, lr=0.2,
                         batch_size=train.n, param_trace=central_trace)
    for a, b in zip(fed_trace, central_trace):
        rel = np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b)))
        assert rel < 1e-9
