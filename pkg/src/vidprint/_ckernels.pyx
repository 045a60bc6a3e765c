# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled conv1d / LSTM kernels.

Semantics mirror the pure-numpy implementations in vidprint.kernels; the
parity test suite asserts agreement between the two backends.
"""

import numpy as np

from libc.math cimport exp, tanh


cdef inline double _sigmoid(double z) noexcept nogil:
    return 1.0 / (1.0 + exp(-z))


def conv1d_forward(double[:, ::1] x, double[:, ::1] w, double[::1] b):
    cdef Py_ssize_t bs = x.shape[0], length = x.shape[1]
    cdef Py_ssize_t nf = w.shape[0], k = w.shape[1]
    cdef Py_ssize_t lo = length - k + 1
    out_arr = np.empty((bs, lo, nf), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, t, f, j
    cdef double acc
    with nogil:
        for i in range(bs):
            for t in range(lo):
                for f in range(nf):
                    acc = b[f]
                    for j in range(k):
                        acc = acc + x[i, t + j] * w[f, j]
                    out[i, t, f] = acc
    return out_arr


def conv1d_backward(double[:, ::1] x, double[:, ::1] w, double[:, :, ::1] dout):
    cdef Py_ssize_t bs = x.shape[0], length = x.shape[1]
    cdef Py_ssize_t nf = w.shape[0], k = w.shape[1]
    cdef Py_ssize_t lo = length - k + 1
    dx_arr = np.zeros((bs, length), dtype=np.float64)
    dw_arr = np.zeros((nf, k), dtype=np.float64)
    db_arr = np.zeros(nf, dtype=np.float64)
    cdef double[:, ::1] dx = dx_arr
    cdef double[:, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    cdef Py_ssize_t i, t, f, j
    cdef double g
    with nogil:
        for i in range(bs):
            for t in range(lo):
                for f in range(nf):
                    g = dout[i, t, f]
                    db[f] += g
                    for j in range(k):
                        dw[f, j] += g * x[i, t + j]
                        dx[i, t + j] += g * w[f, j]
    return dx_arr, dw_arr, db_arr


def lstm_forward(double[:, ::1] x, double[::1] wx, double[:, ::1] wh, double[::1] b):
    cdef Py_ssize_t bs = x.shape[0], steps = x.shape[1]
    cdef Py_ssize_t hid = wh.shape[0]
    cdef Py_ssize_t g4 = 4 * hid

    ia_arr = np.empty((steps, bs, hid), dtype=np.float64)
    fa_arr = np.empty((steps, bs, hid), dtype=np.float64)
    ga_arr = np.empty((steps, bs, hid), dtype=np.float64)
    oa_arr = np.empty((steps, bs, hid), dtype=np.float64)
    ca_arr = np.empty((steps, bs, hid), dtype=np.float64)
    ha_arr = np.empty((steps, bs, hid), dtype=np.float64)
    pre_arr = np.empty((bs, g4), dtype=np.float64)
    hprev_arr = np.zeros((bs, hid), dtype=np.float64)
    cprev_arr = np.zeros((bs, hid), dtype=np.float64)

    cdef double[:, :, ::1] ia = ia_arr, fa = fa_arr, ga = ga_arr
    cdef double[:, :, ::1] oa = oa_arr, ca = ca_arr, ha = ha_arr
    cdef double[:, ::1] pre = pre_arr, hprev = hprev_arr, cprev = cprev_arr
    cdef Py_ssize_t t, i, j, n
    cdef double xv, hv, ig, fg, gg, og, cc

    with nogil:
        for t in range(steps):
            for i in range(bs):
                xv = x[i, t]
                for j in range(g4):
                    pre[i, j] = xv * wx[j] + b[j]
                for n in range(hid):
                    hv = hprev[i, n]
                    if hv != 0.0:
                        for j in range(g4):
                            pre[i, j] += hv * wh[n, j]
            for i in range(bs):
                for n in range(hid):
                    ig = _sigmoid(pre[i, n])
                    fg = _sigmoid(pre[i, hid + n])
                    gg = tanh(pre[i, 2 * hid + n])
                    og = _sigmoid(pre[i, 3 * hid + n])
                    cc = fg * cprev[i, n] + ig * gg
                    ia[t, i, n] = ig
                    fa[t, i, n] = fg
                    ga[t, i, n] = gg
                    oa[t, i, n] = og
                    ca[t, i, n] = cc
                    ha[t, i, n] = og * tanh(cc)
            for i in range(bs):
                for n in range(hid):
                    hprev[i, n] = ha[t, i, n]
                    cprev[i, n] = ca[t, i, n]

    cache = {"i": ia_arr, "f": fa_arr, "g": ga_arr, "o": oa_arr, "c": ca_arr, "h": ha_arr}
    return ha_arr[steps - 1].copy(), cache


def lstm_backward(double[:, ::1] x, double[::1] wx, double[:, ::1] wh, cache,
                  double[:, ::1] dh_last):
    cdef Py_ssize_t bs = x.shape[0], steps = x.shape[1]
    cdef Py_ssize_t hid = wh.shape[0]
    cdef Py_ssize_t g4 = 4 * hid

    cdef double[:, :, ::1] ia = cache["i"], fa = cache["f"], ga = cache["g"]
    cdef double[:, :, ::1] oa = cache["o"], ca = cache["c"], ha = cache["h"]

    dwx_arr = np.zeros(g4, dtype=np.float64)
    dwh_arr = np.zeros((hid, g4), dtype=np.float64)
    db_arr = np.zeros(g4, dtype=np.float64)
    dh_arr = np.array(dh_last, dtype=np.float64, copy=True)
    dc_arr = np.zeros((bs, hid), dtype=np.float64)
    da_arr = np.empty((bs, g4), dtype=np.float64)
    dhn_arr = np.empty((bs, hid), dtype=np.float64)

    cdef double[::1] dwx = dwx_arr, db = db_arr
    cdef double[:, ::1] dwh = dwh_arr, dh = dh_arr, dc = dc_arr
    cdef double[:, ::1] da = da_arr, dhn = dhn_arr
    cdef Py_ssize_t t, i, j, n
    cdef double tc, dcs, ig, fg, gg, og, cp, hp, xv, acc

    with nogil:
        for t in range(steps - 1, -1, -1):
            for i in range(bs):
                for n in range(hid):
                    ig = ia[t, i, n]
                    fg = fa[t, i, n]
                    gg = ga[t, i, n]
                    og = oa[t, i, n]
                    tc = tanh(ca[t, i, n])
                    cp = ca[t - 1, i, n] if t > 0 else 0.0
                    dcs = dc[i, n] + dh[i, n] * og * (1.0 - tc * tc)
                    da[i, n] = dcs * gg * ig * (1.0 - ig)
                    da[i, hid + n] = dcs * cp * fg * (1.0 - fg)
                    da[i, 2 * hid + n] = dcs * ig * (1.0 - gg * gg)
                    da[i, 3 * hid + n] = dh[i, n] * tc * og * (1.0 - og)
                    dc[i, n] = dcs * fg
            for i in range(bs):
                xv = x[i, t]
                for j in range(g4):
                    dwx[j] += xv * da[i, j]
                    db[j] += da[i, j]
            if t > 0:
                for i in range(bs):
                    for n in range(hid):
                        hp = ha[t - 1, i, n]
                        if hp != 0.0:
                            for j in range(g4):
                                dwh[n, j] += hp * da[i, j]
            for i in range(bs):
                for n in range(hid):
                    acc = 0.0
                    for j in range(g4):
                        acc += da[i, j] * wh[n, j]
                    dhn[i, n] = acc
            for i in range(bs):
                for n in range(hid):
                    dh[i, n] = dhn[i, n]

    return dwx_arr, dwh_arr, db_arr
