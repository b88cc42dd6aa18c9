"""Vectorized numpy implementations of the model kernels.

Reference backend; the numba twin in `_backend_numba` computes the same
quantities with explicit loops. Both modules expose the same six functions
(see `backends`). Parameter layouts are row-major flat vectors:

    logistic: [W (d*C), b (C)]            with W[j, c] = values[j*C + c]
    mlp:      [W1 (d*h), b1 (h), W2 (h*C), b2 (C)]

`*_train_epochs` mutate `values` in place and return the last epoch's
sample-weighted mean loss; `perms` holds one index permutation per epoch.
"""
from __future__ import annotations

import numpy as np


def logistic_logits(values: np.ndarray, X: np.ndarray, C: int) -> np.ndarray:
    d = X.shape[1]
    W = values[: d * C].reshape(d, C)
    b = values[d * C :]
    return X @ W + b


def mlp_logits(values: np.ndarray, X: np.ndarray, h: int, C: int) -> np.ndarray:
    d = X.shape[1]
    W1, b1, W2, b2 = _mlp_views(values, d, h, C)
    return np.tanh(X @ W1 + b1) @ W2 + b2


def logistic_loss_grad(values: np.ndarray, X: np.ndarray, y: np.ndarray, C: int) -> tuple[float, np.ndarray]:
    n, d = X.shape
    logits = logistic_logits(values, X, C)
    loss, delta = _softmax_delta(logits, y)
    grad = np.concatenate([(X.T @ delta).ravel(), delta.sum(axis=0)])
    return loss, grad


def mlp_loss_grad(values: np.ndarray, X: np.ndarray, y: np.ndarray, h: int, C: int) -> tuple[float, np.ndarray]:
    n, d = X.shape
    W1, b1, W2, b2 = _mlp_views(values, d, h, C)
    hidden = np.tanh(X @ W1 + b1)
    loss, delta = _softmax_delta(hidden @ W2 + b2, y)
    d_hidden = (delta @ W2.T) * (1.0 - hidden * hidden)
    grad = np.concatenate([
        (X.T @ d_hidden).ravel(),
        d_hidden.sum(axis=0),
        (hidden.T @ delta).ravel(),
        delta.sum(axis=0),
    ])
    return loss, grad


def logistic_train_epochs(values: np.ndarray, X: np.ndarray, y: np.ndarray,
                          perms: np.ndarray, B: int, lr: float, C: int) -> float:
    return _train_epochs(logistic_loss_grad, (C,), values, X, y, perms, B, lr)


def mlp_train_epochs(values: np.ndarray, X: np.ndarray, y: np.ndarray,
                     perms: np.ndarray, B: int, lr: float, h: int, C: int) -> float:
    return _train_epochs(mlp_loss_grad, (h, C), values, X, y, perms, B, lr)


def _train_epochs(loss_grad, extra, values, X, y, perms, B, lr) -> float:
    n = y.shape[0]
    last = 0.0
    for e in range(perms.shape[0]):
        perm = perms[e]
        total = 0.0
        for start in range(0, n, B):
            idx = perm[start : start + B]
            loss, grad = loss_grad(values, X[idx], y[idx], *extra)
            values -= lr * grad
            total += loss * idx.shape[0]
        last = total / n
    return last


def _softmax_delta(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and d(loss)/d(logits) for one batch."""
    n = y.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    sums = exp.sum(axis=1)
    loss = float(np.mean(np.log(sums) - shifted[np.arange(n), y]))
    delta = exp / sums[:, None]
    delta[np.arange(n), y] -= 1.0
    delta /= n
    return loss, delta


def _mlp_views(values: np.ndarray, d: int, h: int, C: int):
    o1, o2, o3 = d * h, d * h + h, d * h + h + h * C
    return (values[:o1].reshape(d, h), values[o1:o2],
            values[o2:o3].reshape(h, C), values[o3:])
