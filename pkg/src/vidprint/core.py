"""Shared vector primitives: distances, resampling, normalization, rng streams.

All numerics are double precision. Vectors are 1-D float64 numpy arrays with
finite entries.
"""

from __future__ import annotations

import zlib

import numpy as np


def as_vector(v) -> np.ndarray:
    """Coerce to a finite, non-empty 1-D float64 array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("empty vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector contains NaN or Inf")
    return arr


def euclidean_distance(a, b) -> float:
    a = as_vector(a)
    b = as_vector(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def resample_linear(v, new_len: int) -> np.ndarray:
    """Endpoint-preserving linear interpolation onto new_len samples."""
    arr = as_vector(v)
    if new_len < 1:
        raise ValueError("new_len must be >= 1")
    if new_len == arr.size:
        return arr.copy()
    if arr.size == 1:
        return np.full(new_len, arr[0])
    src = np.linspace(0.0, 1.0, arr.size)
    dst = np.linspace(0.0, 1.0, new_len)
    return np.interp(dst, src, arr)


def minmax_normalize(v) -> np.ndarray:
    """Map to [0, 1]; a constant vector maps to all zeros."""
    arr = as_vector(v)
    lo = arr.min()
    hi = arr.max()
    if hi == lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


def pairwise_distances(a, b) -> np.ndarray:
    """Euclidean distances between rows of a (n,d) and b (m,d) -> (n,m)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"incompatible shapes {a.shape} and {b.shape}")
    sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * (a @ b.T)
    np.maximum(sq, 0.0, out=sq)
    return np.sqrt(sq)


def _seed_part(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"seed parts must be int or str, got {type(part).__name__}")


def derive_rng(seed: int, *parts) -> np.random.Generator:
    """Deterministic generator keyed by a master seed plus context parts.

    Independent of call order and of any other stream, so concurrent jobs
    reproduce the serial results.
    """
    return np.random.default_rng(np.random.SeedSequence([_seed_part(seed)] + [_seed_part(p) for p in parts]))


def derive_seed(seed: int, *parts) -> int:
    ss = np.random.SeedSequence([_seed_part(seed)] + [_seed_part(p) for p in parts])
    return int(ss.generate_state(1, np.uint64)[0])
