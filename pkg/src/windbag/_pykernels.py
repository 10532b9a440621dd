"""Numpy implementations of the hot loops, used when the extension is absent."""

import numpy as np


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def train_full_batch(X, y, W, b1, v, b2, lr, max_epochs, target_error, curve):
    n = X.shape[0]
    step = lr / n
    recorded = 0
    diverged = -1
    for ep in range(max_epochs):
        Z = _sigmoid(X @ W.T + b1)
        u = _sigmoid(Z @ v + b2[0])
        r = u - y
        err = 0.5 * float(r @ r) / n
        curve[ep] = err
        recorded = ep + 1
        if not np.isfinite(err):
            diverged = ep
            break
        if err <= target_error:
            break
        dout = r * u * (1.0 - u)
        dz = np.outer(dout, v) * Z * (1.0 - Z)
        gv = Z.T @ dout
        gb2 = dout.sum()
        gW = dz.T @ X
        gb1 = dz.sum(axis=0)
        v -= step * gv
        b1 -= step * gb1
        W -= step * gW
        b2[0] -= step * gb2
    return recorded, diverged


def relief_accumulate(Xn, yn, anchors, k, rank_weights):
    n, nf = Xn.shape
    kk = min(k, n - 1)
    w = rank_weights[:kk] / rank_weights[:kk].sum()
    n_dc = 0.0
    n_da = np.zeros(nf)
    n_dcda = np.zeros(nf)
    for i in anchors:
        diffs = np.abs(Xn - Xn[i])
        dist = diffs.sum(axis=1)
        dist[i] = np.inf
        order = np.argsort(dist, kind="stable")[:kk]
        dy = np.abs(yn[order] - yn[i])
        dx = diffs[order]
        n_dc += float(dy @ w)
        n_da += w @ dx
        n_dcda += (dy * w) @ dx
    return n_dc, n_da, n_dcda
