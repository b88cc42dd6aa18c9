"""Numba-compiled model kernels.

Same contract and parameter layouts as `_backend_numpy`. The logistic
kernels fuse everything into per-sample loops, which beats staging through
BLAS at logistic sizes (d*C products are tiny). The mlp kernels do the
opposite: the large matrix products go through np.dot (BLAS) and only the
softmax/tanh stages are fused loops, since loop code loses to dgemm once
the hidden layer is involved. Importing this module without numba installed
raises ImportError; `backends` catches that and falls back.

No fastmath: reassociation would break run-to-run determinism.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def logistic_logits(values, X, C):
    n, d = X.shape
    logits = np.empty((n, C))
    for i in range(n):
        for c in range(C):
            acc = values[d * C + c]
            for j in range(d):
                acc += X[i, j] * values[j * C + c]
            logits[i, c] = acc
    return logits


@njit(cache=True, nogil=True)
def mlp_logits(values, X, h, C):
    n, d = X.shape
    ob1 = d * h
    ow2 = d * h + h
    ob2 = d * h + h + h * C
    W1 = np.ascontiguousarray(values[:ob1]).reshape(d, h)
    b1 = values[ob1:ow2]
    W2 = np.ascontiguousarray(values[ow2:ob2]).reshape(h, C)
    b2 = values[ob2:]
    hidden = np.dot(X, W1)
    for i in range(n):
        for k in range(h):
            hidden[i, k] = np.tanh(hidden[i, k] + b1[k])
    logits = np.dot(hidden, W2)
    for i in range(n):
        for c in range(C):
            logits[i, c] += b2[c]
    return logits


@njit(cache=True, nogil=True)
def logistic_loss_grad(values, X, y, C):
    n, d = X.shape
    grad = np.zeros(values.shape[0])
    logits = np.empty(C)
    probs = np.empty(C)
    loss = 0.0
    for i in range(n):
        for c in range(C):
            acc = values[d * C + c]
            for j in range(d):
                acc += X[i, j] * values[j * C + c]
            logits[c] = acc
        mx = logits[0]
        for c in range(1, C):
            if logits[c] > mx:
                mx = logits[c]
        se = 0.0
        for c in range(C):
            probs[c] = np.exp(logits[c] - mx)
            se += probs[c]
        loss += np.log(se) - (logits[y[i]] - mx)
        inv = 1.0 / se
        for c in range(C):
            diff = probs[c] * inv
            if c == y[i]:
                diff -= 1.0
            for j in range(d):
                grad[j * C + c] += diff * X[i, j]
            grad[d * C + c] += diff
    inv_n = 1.0 / n
    for k in range(grad.shape[0]):
        grad[k] *= inv_n
    return loss * inv_n, grad


@njit(cache=True, nogil=True)
def mlp_loss_grad(values, X, y, h, C):
    n, d = X.shape
    ob1 = d * h
    ow2 = d * h + h
    ob2 = d * h + h + h * C
    W1 = np.ascontiguousarray(values[:ob1]).reshape(d, h)
    b1 = values[ob1:ow2]
    W2 = np.ascontiguousarray(values[ow2:ob2]).reshape(h, C)
    b2 = values[ob2:]
    hidden = np.dot(X, W1)
    for i in range(n):
        for k in range(h):
            hidden[i, k] = np.tanh(hidden[i, k] + b1[k])
    delta = np.dot(hidden, W2)
    loss = 0.0
    inv_n = 1.0 / n
    for i in range(n):
        mx = delta[i, 0] + b2[0]
        for c in range(C):
            delta[i, c] += b2[c]
            if delta[i, c] > mx:
                mx = delta[i, c]
        true_shifted = delta[i, y[i]] - mx
        se = 0.0
        for c in range(C):
            delta[i, c] = np.exp(delta[i, c] - mx)
            se += delta[i, c]
        loss += np.log(se) - true_shifted
        inv = inv_n / se
        for c in range(C):
            delta[i, c] *= inv
        delta[i, y[i]] -= inv_n
    gW2 = np.dot(hidden.T, delta)
    d_hidden = np.dot(delta, W2.T)
    for i in range(n):
        for k in range(h):
            d_hidden[i, k] *= 1.0 - hidden[i, k] * hidden[i, k]
    gW1 = np.dot(X.T, d_hidden)
    grad = np.empty(values.shape[0])
    grad[:ob1] = gW1.ravel()
    for k in range(h):
        acc = 0.0
        for i in range(n):
            acc += d_hidden[i, k]
        grad[ob1 + k] = acc
    grad[ow2:ob2] = gW2.ravel()
    for c in range(C):
        acc = 0.0
        for i in range(n):
            acc += delta[i, c]
        grad[ob2 + c] = acc
    return loss * inv_n, grad


@njit(cache=True, nogil=True)
def logistic_train_epochs(values, X, y, perms, B, lr, C):
    n = y.shape[0]
    d = X.shape[1]
    last = 0.0
    for e in range(perms.shape[0]):
        total = 0.0
        start = 0
        while start < n:
            stop = min(start + B, n)
            bs = stop - start
            Xb = np.empty((bs, d))
            yb = np.empty(bs, dtype=np.int64)
            for r in range(bs):
                src = perms[e, start + r]
                for j in range(d):
                    Xb[r, j] = X[src, j]
                yb[r] = y[src]
            loss, grad = logistic_loss_grad(values, Xb, yb, C)
            for k in range(values.shape[0]):
                values[k] -= lr * grad[k]
            total += loss * bs
            start = stop
        last = total / n
    return last


@njit(cache=True, nogil=True)
def mlp_train_epochs(values, X, y, perms, B, lr, h, C):
    n = y.shape[0]
    d = X.shape[1]
    last = 0.0
    for e in range(perms.shape[0]):
        total = 0.0
        start = 0
        while start < n:
            stop = min(start + B, n)
            bs = stop - start
            Xb = np.empty((bs, d))
            yb = np.empty(bs, dtype=np.int64)
            for r in range(bs):
                src = perms[e, start + r]
                for j in range(d):
                    Xb[r, j] = X[src, j]
                yb[r] = y[src]
            loss, grad = mlp_loss_grad(values, Xb, yb, h, C)
            for k in range(values.shape[0]):
                values[k] -= lr * grad[k]
            total += loss * bs
            start = stop
        last = total / n
    return last
