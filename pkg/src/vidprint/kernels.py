"""Hot numeric kernels with a compiled fast path.

conv1d and LSTM forward/backward dominate encoder training time. Each has a
pure-numpy implementation here and a Cython twin in vidprint._ckernels. The
default mode ('auto', selected at import when the extension built) uses the
compiled conv kernels always and the compiled LSTM only while its per-step
GEMM is small enough to beat BLAS; 'pure'/'compiled' force one side, and
``VIDPRINT_PURE_PYTHON=1`` forces the fallback at import. Both backends
implement the same arithmetic; parity is asserted in the test suite.

Gate packing for the LSTM weight axes is [input | forget | cell | output].
"""

from __future__ import annotations

import os

import numpy as np

try:
    from . import _ckernels

    HAVE_COMPILED = True
except ImportError:
    _ckernels = None
    HAVE_COMPILED = False


def _f64(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


# ---------------------------------------------------------------- pure numpy


def _conv1d_forward_np(x, w, b):
    # x (B, L) single channel; w (F, K); b (F) -> (B, L-K+1, F)
    k = w.shape[1]
    cols = np.lib.stride_tricks.sliding_window_view(x, k, axis=1)
    return cols @ w.T + b


def _conv1d_backward_np(x, w, dout):
    k = w.shape[1]
    lo = x.shape[1] - k + 1
    cols = np.lib.stride_tricks.sliding_window_view(x, k, axis=1)
    dw = np.einsum("btf,btk->fk", dout, cols)
    db = dout.sum(axis=(0, 1))
    dx = np.zeros_like(x)
    for j in range(k):
        dx[:, j:j + lo] += dout @ w[:, j]
    return dx, dw, db


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _lstm_forward_np(x, wx, wh, b):
    # x (B, T) scalar sequence; wx (4H,); wh (H, 4H); b (4H,)
    bs, steps = x.shape
    hid = wh.shape[0]
    ia = np.empty((steps, bs, hid))
    fa = np.empty((steps, bs, hid))
    ga = np.empty((steps, bs, hid))
    oa = np.empty((steps, bs, hid))
    ca = np.empty((steps, bs, hid))
    ha = np.empty((steps, bs, hid))
    h = np.zeros((bs, hid))
    c = np.zeros((bs, hid))
    for t in range(steps):
        pre = x[:, t, None] * wx + h @ wh + b
        ig = _sigmoid(pre[:, :hid])
        fg = _sigmoid(pre[:, hid:2 * hid])
        gg = np.tanh(pre[:, 2 * hid:3 * hid])
        og = _sigmoid(pre[:, 3 * hid:])
        c = fg * c + ig * gg
        h = og * np.tanh(c)
        ia[t], fa[t], ga[t], oa[t], ca[t], ha[t] = ig, fg, gg, og, c, h
    cache = {"i": ia, "f": fa, "g": ga, "o": oa, "c": ca, "h": ha}
    return h.copy(), cache


def _lstm_backward_np(x, wx, wh, cache, dh_last):
    bs, steps = x.shape
    hid = wh.shape[0]
    ia, fa, ga, oa, ca, ha = (cache[k] for k in "ifgoch")
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * hid)
    dh = dh_last.copy()
    dc = np.zeros((bs, hid))
    for t in reversed(range(steps)):
        ig, fg, gg, og = ia[t], fa[t], ga[t], oa[t]
        tc = np.tanh(ca[t])
        c_prev = ca[t - 1] if t > 0 else np.zeros((bs, hid))
        dcs = dc + dh * og * (1.0 - tc * tc)
        da = np.concatenate(
            [
                dcs * gg * ig * (1.0 - ig),
                dcs * c_prev * fg * (1.0 - fg),
                dcs * ig * (1.0 - gg * gg),
                dh * tc * og * (1.0 - og),
            ],
            axis=1,
        )
        dwx += x[:, t] @ da
        if t > 0:
            dwh += ha[t - 1].T @ da
        db += da.sum(axis=0)
        dh = da @ wh.T
        dc = dcs * fg
    return dwx, dwh, db


_PURE = {
    "conv1d_forward": _conv1d_forward_np,
    "conv1d_backward": _conv1d_backward_np,
    "lstm_forward": _lstm_forward_np,
    "lstm_backward": _lstm_backward_np,
}

_COMPILED = (
    {
        "conv1d_forward": lambda x, w, b: _ckernels.conv1d_forward(x, w, b),
        "conv1d_backward": lambda x, w, dout: _ckernels.conv1d_backward(x, w, dout),
        "lstm_forward": lambda x, wx, wh, b: _ckernels.lstm_forward(x, wx, wh, b),
        "lstm_backward": lambda x, wx, wh, cache, dh: _ckernels.lstm_backward(x, wx, wh, cache, dh),
    }
    if HAVE_COMPILED
    else None
)

# benchmarks/bench_kernels.py: the hand-written LSTM loops beat the
# BLAS-backed numpy path only while the per-step GEMM stays small; above this
# batch*hidden^2 bound the auto mode routes the LSTM to numpy. Dispatch is a
# pure function of the operand shapes, so runs stay reproducible.
LSTM_COMPILED_MAX_WORK = 8192

_mode = "pure"
if HAVE_COMPILED and os.environ.get("VIDPRINT_PURE_PYTHON", "") != "1":
    _mode = "auto"


def backend() -> str:
    """Backend mode in use: 'auto', 'compiled' or 'pure'."""
    return _mode


def set_backend(name: str) -> None:
    """'pure' and 'compiled' force one implementation; 'auto' picks per op."""
    global _mode
    if name in ("compiled", "auto") and not HAVE_COMPILED:
        raise RuntimeError("compiled kernels are not available in this install")
    if name not in ("pure", "compiled", "auto"):
        raise ValueError(f"unknown backend {name!r}")
    _mode = name


def _conv_impl():
    return _PURE if _mode == "pure" else _COMPILED


def _lstm_impl(batch: int, hidden: int):
    if _mode == "pure":
        return _PURE
    if _mode == "compiled":
        return _COMPILED
    if batch * hidden * hidden <= LSTM_COMPILED_MAX_WORK:
        return _COMPILED
    return _PURE


def conv1d_forward(x, w, b) -> np.ndarray:
    return _conv_impl()["conv1d_forward"](_f64(x), _f64(w), _f64(b))


def conv1d_backward(x, w, dout):
    return _conv_impl()["conv1d_backward"](_f64(x), _f64(w), _f64(dout))


def lstm_forward(x, wx, wh, b):
    x = _f64(x)
    wh = _f64(wh)
    impl = _lstm_impl(x.shape[0], wh.shape[0])
    return impl["lstm_forward"](x, _f64(wx), wh, _f64(b))


def lstm_backward(x, wx, wh, cache, dh_last):
    x = _f64(x)
    wh = _f64(wh)
    impl = _lstm_impl(x.shape[0], wh.shape[0])
    return impl["lstm_backward"](x, _f64(wx), wh, cache, _f64(dh_last))
