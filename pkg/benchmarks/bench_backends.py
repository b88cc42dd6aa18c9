"""Compare the numba kernels against the numpy fallback.

Times the epoch-training kernels for both model kinds on synthetic data and
checks that the two implementations agree numerically. Run:

    python benchmarks/bench_backends.py [--samples N] [--epochs E] [--repeats R]
"""
import argparse
import time

import numpy as np

from fedimb import ModelSpec, init_params
from fedimb import _backend_numpy as np_impl

try:
    from fedimb import _backend_numba as nb_impl
except ImportError:
    nb_impl = None


def make_problem(n, d, C, seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, (n, d))
    y = rng.integers(0, C, n)
    return X, y


def run_kernel(impl, kind, values, X, y, perms, B, lr, h, C):
    v = values.copy()
    if kind == "logistic":
        last = impl.logistic_train_epochs(v, X, y, perms, B, lr, C)
    else:
        last = impl.mlp_train_epochs(v, X, y, perms, B, lr, h, C)
    return v, last


def bench(impl, kind, values, X, y, perms, B, lr, h, C, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        run_kernel(impl, kind, values, X, y, perms, B, lr, h, C)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=4096)
    parser.add_argument("--features", type=int, default=32)
    parser.add_argument("--classes", type=int, default=10)
    parser.add_argument("--hidden", type=int, default=32)
    parser.add_argument("--epochs", type=int, default=5)
    parser.add_argument("--batch-size", type=int, default=128)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    n, d, C, h = args.samples, args.features, args.classes, args.hidden
    X, y = make_problem(n, d, C, seed=0)
    rng = np.random.default_rng(1)
    perms = np.stack([rng.permutation(n) for _ in range(args.epochs)])

    print(f"n={n} d={d} C={C} h={h} epochs={args.epochs} "
          f"batch={args.batch_size} (best of {args.repeats})")
    if nb_impl is None:
        print("numba backend not importable; timing numpy only")

    for kind in ("logistic", "mlp"):
        spec = ModelSpec(kind, d, C, hidden_dim=h if kind == "mlp" else None, init_seed=3)
        values = init_params(spec).values

        v_np, loss_np = run_kernel(np_impl, kind, values, X, y, perms,
                                   args.batch_size, 0.1, h, C)
        t_np = bench(np_impl, kind, values, X, y, perms,
                     args.batch_size, 0.1, h, C, args.repeats)
        line = f"{kind:9s} numpy {t_np * 1e3:9.2f} ms"

        if nb_impl is not None:
            # first call includes JIT compilation; warm up before timing
            v_nb, loss_nb = run_kernel(nb_impl, kind, values, X, y, perms,
                                       args.batch_size, 0.1, h, C)
            t_nb = bench(nb_impl, kind, values, X, y, perms,
                         args.batch_size, 0.1, h, C, args.repeats)
            agree = (np.allclose(v_np, v_nb, rtol=1e-10, atol=1e-12)
                     and abs(loss_np - loss_nb) < 1e-10)
            line += (f" | numba {t_nb * 1e3:9.2f} ms | speedup {t_np / t_nb:5.2f}x"
                     f" | agree {'yes' if agree else 'NO'}")
            if not agree:
                print(line)
                return 1
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
