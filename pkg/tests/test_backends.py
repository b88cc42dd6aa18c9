import os
import subprocess
import sys

import numpy as np
import pytest

from fedimb import BACKEND_NAME, ModelSpec, init_params, n_params
from fedimb import _backend_numpy as np_impl

numba_impl = pytest.importorskip("fedimb._backend_numba", reason="numba not installed")


def batch(n=64, d=6, C=4, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0, 1, (n, d)), rng.integers(0, C, n)


def test_env_flag_forces_numpy_backend():
    env = dict(os.environ, FEDIMB_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "import fedimb; print(fedimb.BACKEND_NAME)"],
        capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "numpy"


def test_default_backend_prefers_numba():
    assert BACKEND_NAME == "numba"


@pytest.mark.parametrize("kind", ["logistic", "mlp"])
def test_backends_agree_on_loss_and_gradient(kind):
    C, d, h = 4, 6, 5
    spec = ModelSpec(kind, d, C, hidden_dim=h if kind == "mlp" else None, init_seed=2)
    values = init_params(spec).values
    X, y = batch(d=d, C=C)
    if kind == "logistic":
        l_np, g_np = np_impl.logistic_loss_grad(values, X, y, C)
        l_nb, g_nb = numba_impl.logistic_loss_grad(values, X, y, C)
        logits_np = np_impl.logistic_logits(values, X, C)
        logits_nb = numba_impl.logistic_logits(values, X, C)
    else:
        l_np, g_np = np_impl.mlp_loss_grad(values, X, y, h, C)
        l_nb, g_nb = numba_impl.mlp_loss_grad(values, X, y, h, C)
        logits_np = np_impl.mlp_logits(values, X, h, C)
        logits_nb = numba_impl.mlp_logits(values, X, h, C)
    assert abs(l_np - l_nb) < 1e-12
    assert np.allclose(g_np, g_nb, rtol=1e-12, atol=1e-14)
    assert np.allclose(logits_np, logits_nb, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("kind", ["logistic", "mlp"])
def test_backends_agree_after_training_epochs(kind):
    C, d, h = 4, 6, 5
    spec = ModelSpec(kind, d, C, hidden_dim=h if kind == "mlp" else None, init_seed=7)
    X, y = batch(n=96, d=d, C=C, seed=3)
    perms = np.stack([np.random.default_rng(e).permutation(96) for e in range(3)])

    v_np = init_params(spec).values.copy()
    v_nb = init_params(spec).values.copy()
    if kind == "logistic":
        l_np = np_impl.logistic_train_epochs(v_np, X, y, perms, 32, 0.1, C)
        l_nb = numba_impl.logistic_train_epochs(v_nb, X, y, perms, 32, 0.1, C)
    else:
        l_np = np_impl.mlp_train_epochs(v_np, X, y, perms, 32, 0.1, h, C)
        l_nb = numba_impl.mlp_train_epochs(v_nb, X, y, perms, 32, 0.1, h, C)
    assert abs(l_np - l_nb) < 1e-10
    assert np.allclose(v_np, v_nb, rtol=1e-10, atol=1e-12)


def test_train_epochs_mutates_in_place_and_reports_last_epoch():
    C, d = 3, 4
    spec = ModelSpec("logistic", d, C)
    values = init_params(spec).values.copy()
    before = values.copy()
    X, y = batch(n=30, d=d, C=C, seed=1)
    perms = np.stack([np.random.default_rng(0).permutation(30)])
    last = np_impl.logistic_train_epochs(values, X, y, perms, 10, 0.5, C)
    assert not np.array_equal(values, before)
    assert np.isfinite(last) and last > 0.0

    # zero epochs: no work, loss reported as 0.0 by convention
    untouched = values.copy()
    none = np_impl.logistic_train_epochs(values, X, y, np.empty((0, 30), dtype=np.int64), 10, 0.5, C)
    assert none == 0.0
    assert np.array_equal(values, untouched)
