"""Neural-net building blocks shared by the encoder and the softmax CNNs.

Functional layers over float64 numpy arrays; each forward returns what its
backward needs. conv1d and the LSTM recurrence dispatch through
vidprint.kernels (compiled or pure backend); dense layers are plain BLAS
matmuls in both backends.
"""

from __future__ import annotations

import numpy as np

from . import kernels


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape)


def dense_forward(x, w, b):
    return x @ w + b


def dense_backward(x, w, dy):
    return dy @ w.T, x.T @ dy, dy.sum(axis=0)


def relu(x):
    return np.maximum(x, 0.0)


def relu_grad(activated, dy):
    # gate on the activated output: zero where the unit was clipped
    return dy * (activated > 0)


def dropout_mask(rng: np.random.Generator, shape, rate: float) -> np.ndarray:
    """Inverted dropout: mask scaled by 1/(1-rate) so inference needs no
    rescaling."""
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def conv1d_forward(x, w, b):
    return kernels.conv1d_forward(x, w, b)


def conv1d_backward(x, w, dout):
    return kernels.conv1d_backward(x, w, dout)


def maxpool2_forward(x):
    """Width-2, stride-2 max pool along axis 1 of (B, L, F); an odd tail
    element is dropped. Ties pick the earlier element."""
    pairs = x.shape[1] // 2
    a = x[:, : 2 * pairs : 2, :]
    b = x[:, 1 : 2 * pairs : 2, :]
    second = b > a
    return np.where(second, b, a), second


def maxpool2_backward(second, in_shape, dpool):
    dx = np.zeros(in_shape, dtype=np.float64)
    pairs = dpool.shape[1]
    dx[:, : 2 * pairs : 2, :] = np.where(second, 0.0, dpool)
    dx[:, 1 : 2 * pairs : 2, :] = np.where(second, dpool, 0.0)
    return dx


def lstm_forward(x, wx, wh, b):
    return kernels.lstm_forward(x, wx, wh, b)


def lstm_backward(x, wx, wh, cache, dh_last):
    return kernels.lstm_backward(x, wx, wh, cache, dh_last)


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sparse_xent_loss(probs, labels):
    """Mean negative log likelihood of integer labels."""
    picked = probs[np.arange(probs.shape[0]), labels]
    return float(-np.mean(np.log(np.maximum(picked, 1e-300))))


def sparse_xent_grad(probs, labels):
    """Gradient of the mean cross-entropy w.r.t. the logits."""
    d = probs.copy()
    d[np.arange(probs.shape[0]), labels] -= 1.0
    return d / probs.shape[0]
