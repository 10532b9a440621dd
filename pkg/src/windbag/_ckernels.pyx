# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Semantics mirror ``windbag._pykernels`` exactly."""

import numpy as np

from libc.math cimport exp, fabs, isfinite


cdef inline double _sigmoid(double x) nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def train_full_batch(const double[:, ::1] X, const double[::1] y,
                     double[:, ::1] W, double[::1] b1, double[::1] v,
                     double[::1] b2, double lr, Py_ssize_t max_epochs,
                     double target_error, double[::1] curve):
    """Full-batch gradient descent on the squared-error signal, in place.

    ``curve[e]`` receives the mean error before update ``e``. Returns
    ``(epochs_recorded, diverged_epoch)`` with ``diverged_epoch == -1`` when
    every recorded error was finite.
    """
    cdef Py_ssize_t n = X.shape[0], m = X.shape[1], h = W.shape[0]
    cdef Py_ssize_t ep, i, j, f
    cdef double a, o, u, r, d_out, err, step, dz
    cdef double[:, ::1] Z = np.empty((n, h))
    cdef double[::1] dout = np.empty(n)
    cdef double[:, ::1] gW = np.empty((h, m))
    cdef double[::1] gb1 = np.empty(h)
    cdef double[::1] gv = np.empty(h)
    cdef double gb2
    cdef Py_ssize_t recorded = 0
    cdef Py_ssize_t diverged = -1

    with nogil:
        step = lr / n
        for ep in range(max_epochs):
            err = 0.0
            for i in range(n):
                o = b2[0]
                for j in range(h):
                    a = b1[j]
                    for f in range(m):
                        a = a + W[j, f] * X[i, f]
                    Z[i, j] = _sigmoid(a)
                    o = o + v[j] * Z[i, j]
                u = _sigmoid(o)
                r = u - y[i]
                err = err + r * r
                dout[i] = r * u * (1.0 - u)
            err = 0.5 * err / n
            curve[ep] = err
            recorded = ep + 1
            if not isfinite(err):
                diverged = ep
                break
            if err <= target_error:
                break

            gb2 = 0.0
            for j in range(h):
                gv[j] = 0.0
                gb1[j] = 0.0
                for f in range(m):
                    gW[j, f] = 0.0
            for i in range(n):
                d_out = dout[i]
                gb2 = gb2 + d_out
                for j in range(h):
                    gv[j] = gv[j] + d_out * Z[i, j]
                    dz = d_out * v[j] * Z[i, j] * (1.0 - Z[i, j])
                    gb1[j] = gb1[j] + dz
                    for f in range(m):
                        gW[j, f] = gW[j, f] + dz * X[i, f]

            for j in range(h):
                v[j] = v[j] - step * gv[j]
                b1[j] = b1[j] - step * gb1[j]
                for f in range(m):
                    W[j, f] = W[j, f] - step * gW[j, f]
            b2[0] = b2[0] - step * gb2
    return recorded, diverged


def relief_accumulate(const double[:, ::1] Xn, const double[::1] yn,
                      const long[::1] anchors, Py_ssize_t k,
                      const double[::1] rank_weights):
    """Accumulate the RReliefF statistics over ``anchors``.

    ``Xn`` and ``yn`` are already scaled so absolute differences are the diff
    terms. Neighbours are ranked by Manhattan distance, ties by lower index.
    Returns ``(n_dc, n_da, n_dcda)``.
    """
    cdef Py_ssize_t n = Xn.shape[0], nf = Xn.shape[1]
    cdef Py_ssize_t kk = k if k < n - 1 else n - 1
    cdef Py_ssize_t t, i, j, f, r, pos
    cdef double dist, wsum, w, dy, dx
    cdef double n_dc = 0.0
    n_da_arr = np.zeros(nf)
    n_dcda_arr = np.zeros(nf)
    cdef double[::1] n_da = n_da_arr
    cdef double[::1] n_dcda = n_dcda_arr
    cdef double[::1] best_d = np.empty(kk)
    cdef long[::1] best_i = np.empty(kk, dtype=np.int_)
    cdef Py_ssize_t filled

    wsum = 0.0
    for r in range(kk):
        wsum = wsum + rank_weights[r]

    with nogil:
        for t in range(anchors.shape[0]):
            i = anchors[t]
            filled = 0
            for j in range(n):
                if j == i:
                    continue
                dist = 0.0
                for f in range(nf):
                    dist = dist + fabs(Xn[j, f] - Xn[i, f])
                # insertion into the sorted k-buffer; equal distances keep
                # the earlier (lower) index first
                if filled < kk:
                    pos = filled
                    filled = filled + 1
                elif dist < best_d[kk - 1]:
                    pos = kk - 1
                else:
                    continue
                while pos > 0 and best_d[pos - 1] > dist:
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                    pos = pos - 1
                best_d[pos] = dist
                best_i[pos] = j

            for r in range(kk):
                j = best_i[r]
                w = rank_weights[r] / wsum
                dy = fabs(yn[j] - yn[i])
                n_dc = n_dc + dy * w
                for f in range(nf):
                    dx = fabs(Xn[j, f] - Xn[i, f])
                    n_da[f] = n_da[f] + dx * w
                    n_dcda[f] = n_dcda[f] + dy * dx * w
    return n_dc, n_da_arr, n_dcda_arr
