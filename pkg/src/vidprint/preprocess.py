"""Trace-to-feature preprocessing.

A trace becomes a fixed-length vector of per-bin downlink packet counts:
bin -> optional initial-burst extension (platform rule) -> truncate/pad to the
configured length -> min-max normalize. Gaussian augmentation operates on the
pre-normalization counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping

import numpy as np

from .core import as_vector, minmax_normalize, resample_linear

if TYPE_CHECKING:
    from .ingestion import RawTrace

DOWNLINK = "D"
UPLINK = "U"


def _span_bins(span_s: float, bin_s: float, what: str) -> int:
    n = span_s / bin_s
    if abs(n - round(n)) > 1e-9 or round(n) < 1:
        raise ValueError(f"{what} ({span_s} s) is not a positive multiple of bin_s ({bin_s} s)")
    return int(round(n))


@dataclass(frozen=True)
class BurstExtensionRule:
    """Stretch the first src_span_s of a binned trace over dst_span_s,
    scaling amplitude; src_span_s == dst_span_s with factor 1.0 is the
    identity rule."""

    src_span_s: float
    dst_span_s: float
    amplitude_factor: float

    def __post_init__(self):
        if not 0 < self.src_span_s <= self.dst_span_s:
            raise ValueError("need 0 < src_span_s <= dst_span_s")
        if self.amplitude_factor <= 0:
            raise ValueError("amplitude_factor must be > 0")


# Platform-specific defaults: a platform with a compressed initial burst gets
# its prefix stretched out (and halved for the heavily bursty case), a platform
# that ends transmission early gets its active span stretched to full length.
DEFAULT_PLATFORM_RULES: Mapping[str, BurstExtensionRule] = {
    "YT": BurstExtensionRule(src_span_s=100.0, dst_span_s=200.0, amplitude_factor=0.5),
    "RU": BurstExtensionRule(src_span_s=520.0, dst_span_s=600.0, amplitude_factor=1.0),
}


@dataclass(frozen=True)
class PreprocessConfig:
    bin_s: float = 10.0
    duration_s: float = 600.0
    platform_rules: Mapping[str, BurstExtensionRule] = field(default_factory=dict)
    normalize: bool = True

    def __post_init__(self):
        if self.bin_s <= 0:
            raise ValueError("bin_s must be > 0")
        _span_bins(self.duration_s, self.bin_s, "duration_s")
        for platform, rule in self.platform_rules.items():
            if rule.dst_span_s > self.duration_s:
                raise ValueError(f"rule for {platform!r} extends past duration_s")

    @property
    def n_bins(self) -> int:
        return _span_bins(self.duration_s, self.bin_s, "duration_s")


@dataclass(frozen=True)
class FeatureVector:
    """A binned trace (counts or normalized [0,1] values) plus its identity."""

    values: np.ndarray
    platform: str
    video_id: str
    trial: int
    bin_s: float

    def __post_init__(self):
        object.__setattr__(self, "values", as_vector(self.values))
        if self.bin_s <= 0:
            raise ValueError("bin_s must be > 0")

    def __len__(self) -> int:
        return self.values.size


def bin_downlink_packets(trace: "RawTrace", bin_s: float, duration_s: float) -> np.ndarray:
    """Count downlink packets per [i*bin_s, (i+1)*bin_s) window; packets at or
    beyond duration_s are discarded."""
    n_bins = _span_bins(duration_s, bin_s, "duration_s")
    times = np.array(
        [p.time for p in trace.packets if p.direction == DOWNLINK], dtype=np.float64
    )
    counts = np.zeros(n_bins, dtype=np.float64)
    if times.size:
        idx = np.floor(times / bin_s).astype(np.int64)
        idx = idx[(times < duration_s) & (idx >= 0) & (idx < n_bins)]
        np.add.at(counts, idx, 1.0)
    return counts


def extend_initial_burst(v, rule: BurstExtensionRule, bin_s: float) -> np.ndarray:
    """Resample the prefix covering src_span_s onto dst_span_s bins, scale it,
    keep the remainder, truncate back to the original length."""
    arr = as_vector(v)
    src_bins = _span_bins(rule.src_span_s, bin_s, "src_span_s")
    dst_bins = _span_bins(rule.dst_span_s, bin_s, "dst_span_s")
    if arr.size < src_bins:
        raise ValueError(f"vector of {arr.size} bins shorter than src span of {src_bins}")
    prefix = resample_linear(arr[:src_bins], dst_bins) * rule.amplitude_factor
    out = np.concatenate([prefix, arr[src_bins:]])
    return out[: arr.size]


def truncate_or_pad(v, target_len: int) -> np.ndarray:
    arr = as_vector(v)
    if target_len < 1:
        raise ValueError("target_len must be >= 1")
    if arr.size >= target_len:
        return arr[:target_len].copy()
    return np.concatenate([arr, np.zeros(target_len - arr.size)])


def augment_gaussian(v, fraction: float = 0.05, rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw each element from Normal(v_i, fraction*v_i); zeros stay zero and
    negative draws clamp to zero."""
    arr = as_vector(v)
    if fraction < 0:
        raise ValueError("fraction must be >= 0")
    if fraction == 0:
        return arr.copy()
    if rng is None:
        raise ValueError("rng is required when fraction > 0")
    draws = rng.normal(arr, fraction * arr)
    return np.maximum(draws, 0.0)


def rebin_sum(values, src_bin_s: float, dst_bin_s: float) -> np.ndarray:
    """Aggregate a binned vector to a coarser bin size (mass preserving);
    dst_bin_s must be an integer multiple of src_bin_s."""
    arr = as_vector(values)
    if abs(dst_bin_s - src_bin_s) < 1e-12:
        return arr.copy()
    factor = dst_bin_s / src_bin_s
    if abs(factor - round(factor)) > 1e-9 or round(factor) < 1:
        raise ValueError(f"cannot rebin {src_bin_s} s bins to {dst_bin_s} s bins")
    factor = int(round(factor))
    pad = (-arr.size) % factor
    if pad:
        arr = np.concatenate([arr, np.zeros(pad)])
    return arr.reshape(-1, factor).sum(axis=1)


def preprocess_pipeline(trace, config: PreprocessConfig) -> FeatureVector:
    """Full per-trace pipeline. Accepts a RawTrace (packet records) or an
    already-binned FeatureVector (rebinned to config.bin_s if coarser)."""
    if isinstance(trace, FeatureVector):
        values = rebin_sum(trace.values, trace.bin_s, config.bin_s)
    else:
        values = bin_downlink_packets(trace, config.bin_s, config.duration_s)
    rule = config.platform_rules.get(trace.platform)
    if rule is not None:
        values = extend_initial_burst(values, rule, config.bin_s)
    values = truncate_or_pad(values, config.n_bins)
    if config.normalize:
        values = minmax_normalize(values)
    return FeatureVector(
        values=values,
        platform=trace.platform,
        video_id=trace.video_id,
        trial=trace.trial,
        bin_s=config.bin_s,
    )
