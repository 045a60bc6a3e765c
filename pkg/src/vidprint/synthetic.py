"""Synthetic multi-platform streaming datasets.

Each video class gets a smooth strictly-positive per-second rate profile (its
VBR stand-in). A platform model re-chunks that profile into delivery bursts:
one burst per segment_s carrying the profile mass of its segment, scaled by a
gain, jittered with multiplicative Gaussian noise, optionally compressed at
startup (buffering faster than playback) and cut off early. Generation is a
pure function of SyntheticSpec, so datasets regenerate bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_vector, derive_rng
from .ingestion import VBR_PLATFORM, Dataset
from .preprocess import FeatureVector

# per-second profile mass scale; arbitrary since features are normalized later
_BASE_RATE = 1000.0
_SMOOTH_SPAN_S = 15.0


@dataclass(frozen=True)
class PlatformModel:
    segment_s: float
    gain: float = 1.0
    noise_sigma: float = 0.0
    startup: tuple[float, float] | None = None  # (span_s, speedup)
    truncate_s: float | None = None

    def __post_init__(self):
        if self.segment_s <= 0:
            raise ValueError("segment_s must be > 0")
        if self.gain <= 0:
            raise ValueError("gain must be > 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.startup is not None:
            span, speedup = self.startup
            if span <= 0 or speedup <= 0:
                raise ValueError("startup needs positive span and speedup")
            object.__setattr__(self, "startup", (float(span), float(speedup)))
        if self.truncate_s is not None and self.truncate_s <= 0:
            raise ValueError("truncate_s must be > 0")


@dataclass(frozen=True)
class SyntheticSpec:
    n_classes: int
    trials_per_class: int
    platform_models: dict[str, PlatformModel]
    duration_s: float = 600.0
    resolution_s: float = 1.0
    seed: int = 0
    include_vbr: bool = True

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.trials_per_class < 1:
            raise ValueError("need at least 1 trial per class")
        if not self.platform_models:
            raise ValueError("need at least one platform model")
        if self.resolution_s <= 0 or self.duration_s <= 0:
            raise ValueError("duration_s and resolution_s must be > 0")
        n = self.duration_s / self.resolution_s
        if abs(n - round(n)) > 1e-9:
            raise ValueError("resolution_s must divide duration_s")

    @property
    def class_ids(self) -> list[str]:
        return [f"v{i:03d}" for i in range(self.n_classes)]


def easy_pair() -> dict[str, PlatformModel]:
    """Two VBR-faithful platforms that differ in delivery cadence, gain and a
    mild initial buffering. Raw bin-by-bin matching across them fails (the
    cadence mismatch dominates) while the shared content signal stays
    recoverable."""
    return {
        "P1": PlatformModel(segment_s=5.0, gain=1.0, noise_sigma=0.05),
        "P2": PlatformModel(segment_s=25.0, gain=2.5, noise_sigma=0.05, startup=(100.0, 2.0)),
    }


def hard_platform() -> PlatformModel:
    """A platform with a compressed startup burst and an early end of
    transmission, the traits that defeat raw cross-platform matching."""
    return PlatformModel(
        segment_s=25.0,
        gain=1.0,
        noise_sigma=0.35,
        startup=(100.0, 2.0),
        truncate_s=520.0,
    )


def easy_hard_pair() -> dict[str, PlatformModel]:
    return {"P1": PlatformModel(segment_s=5.0, gain=1.0, noise_sigma=0.05), "P3": hard_platform()}


def gen_vbr_profile(
    class_id: int | str,
    duration_s: float,
    resolution_s: float,
    rng: np.random.Generator | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Strictly positive smooth rate profile: moving average of an
    exponentiated, variance-normalized random walk. Deterministic in
    (seed, class_id) when no rng is passed."""
    n = duration_s / resolution_s
    if abs(n - round(n)) > 1e-9 or round(n) < 1:
        raise ValueError("resolution_s must divide duration_s")
    n = int(round(n))
    if rng is None:
        rng = derive_rng(seed, "vbr-profile", class_id)
    walk = np.cumsum(rng.standard_normal(n))
    spread = walk.std()
    if spread > 0:
        walk = (walk - walk.mean()) / spread
    shape = np.exp(0.9 * walk)
    window = max(1, int(round(_SMOOTH_SPAN_S / resolution_s)))
    kernel = np.ones(window) / window
    smooth = np.convolve(shape, kernel, mode="same")
    return _BASE_RATE * smooth / smooth.mean()


def apply_platform_model(
    profile,
    model: PlatformModel,
    rng: np.random.Generator,
    resolution_s: float = 1.0,
) -> np.ndarray:
    """Deliver a profile through a platform: per-segment bursts placed at
    their (possibly startup-compressed) arrival times, binned back onto the
    profile's resolution."""
    prof = as_vector(profile)
    n = prof.size
    duration_s = n * resolution_s
    seg_bins = model.segment_s / resolution_s
    if abs(seg_bins - round(seg_bins)) > 1e-9 or round(seg_bins) < 1:
        raise ValueError("segment_s must be a positive multiple of resolution_s")
    seg_bins = int(round(seg_bins))
    n_seg = (n + seg_bins - 1) // seg_bins
    eps = rng.standard_normal(n_seg)

    out = np.zeros(n, dtype=np.float64)
    for s in range(n_seg):
        mass = prof[s * seg_bins:(s + 1) * seg_bins].sum()
        burst = mass * model.gain * (1.0 + model.noise_sigma * eps[s])
        if burst <= 0:
            continue
        sched = s * model.segment_s
        arrive = sched
        if model.startup is not None:
            span, speedup = model.startup
            if sched < span:
                arrive = sched / speedup
            else:
                arrive = sched - span * (1.0 - 1.0 / speedup)
        if model.truncate_s is not None and arrive >= model.truncate_s:
            continue
        if arrive >= duration_s:
            continue
        out[int(arrive // resolution_s)] += burst
    return out


def gen_synthetic_dataset(spec: SyntheticSpec) -> Dataset:
    """Labeled dataset of n_classes x trials_per_class x platforms binned
    traces plus (optionally) one VBR profile per class."""
    traces: dict[tuple[str, str, int], FeatureVector] = {}
    platform_names = list(spec.platform_models)
    for ci, cls in enumerate(spec.class_ids):
        profile = gen_vbr_profile(ci, spec.duration_s, spec.resolution_s, seed=spec.seed)
        if spec.include_vbr:
            traces[(VBR_PLATFORM, cls, 0)] = FeatureVector(
                values=profile,
                platform=VBR_PLATFORM,
                video_id=cls,
                trial=0,
                bin_s=spec.resolution_s,
            )
        for pi, pname in enumerate(platform_names):
            model = spec.platform_models[pname]
            for trial in range(spec.trials_per_class):
                rng = derive_rng(spec.seed, "trace", ci, pi, trial)
                values = apply_platform_model(profile, model, rng, spec.resolution_s)
                traces[(pname, cls, trial)] = FeatureVector(
                    values=values,
                    platform=pname,
                    video_id=cls,
                    trial=trial,
                    bin_s=spec.resolution_s,
                )
    platform_list = platform_names + ([VBR_PLATFORM] if spec.include_vbr else [])
    return Dataset(traces=traces, class_list=list(spec.class_ids), platform_list=platform_list)
