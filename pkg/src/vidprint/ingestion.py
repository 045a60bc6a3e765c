"""Parsers and the in-memory dataset.

File formats (all UTF-8 text):
  packet log   TSV or CSV; either ``time_s, direction(U|D), size_bytes`` or
               ``time_epoch, src, dst, size_bytes`` plus a client address
               supplied out-of-band (the manifest entry).
  binned trace header lines ``# platform=`` ``# video_id=`` ``# trial=``
               ``# bin_s=`` then one value per line.
  VBR segments header ``# segment_s=<real>`` then ``index,bytes`` rows.
  manifest     one JSON document:
               {"platforms": {<id>: {<video_id>: [{"path":..., "kind":
               "packet_log"|"binned", "client": optional}]}}}
"""

from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .preprocess import DOWNLINK, UPLINK, FeatureVector

VBR_PLATFORM = "VBR"


class ParseError(ValueError):
    """A malformed input row or header; message carries the line number."""


class LoadError(ValueError):
    """A manifest or dataset-level failure."""


@dataclass(frozen=True)
class PacketRecord:
    time: float
    size: int
    direction: str

    def __post_init__(self):
        if self.time < 0:
            raise ValueError(f"negative packet time {self.time}")
        if self.size < 0:
            raise ValueError(f"negative packet size {self.size}")
        if self.direction not in (DOWNLINK, UPLINK):
            raise ValueError(f"direction must be {DOWNLINK!r} or {UPLINK!r}")


@dataclass(frozen=True)
class RawTrace:
    packets: tuple[PacketRecord, ...]
    platform: str
    video_id: str
    trial: int

    def __post_init__(self):
        object.__setattr__(self, "packets", tuple(self.packets))
        if not self.packets:
            raise ValueError("a trace needs at least one packet")
        times = [p.time for p in self.packets]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("packet times must be non-decreasing")


@dataclass
class Dataset:
    """Traces keyed by (platform, video_id, trial). Every class appears on
    every listed platform; construction validates this."""

    traces: dict[tuple[str, str, int], object] = field(default_factory=dict)
    class_list: list[str] = field(default_factory=list)
    platform_list: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        classes = set(self.class_list)
        platforms = set(self.platform_list)
        if len(classes) != len(self.class_list) or len(platforms) != len(self.platform_list):
            raise LoadError("duplicate entries in class_list or platform_list")
        seen: dict[str, set[str]] = {p: set() for p in self.platform_list}
        for platform, video_id, _trial in self.traces:
            if platform not in platforms:
                raise LoadError(f"trace platform {platform!r} not in platform_list")
            if video_id not in classes:
                raise LoadError(f"trace class {video_id!r} not in class_list")
            seen[platform].add(video_id)
        for platform, got in seen.items():
            missing = classes - got
            if missing:
                raise LoadError(
                    f"platform {platform!r} is missing classes: {sorted(missing)[:5]}"
                )

    def trials(self, platform: str, video_id: str) -> list[int]:
        return sorted(t for (p, v, t) in self.traces if p == platform and v == video_id)

    def get(self, platform: str, video_id: str, trial: int):
        return self.traces[(platform, video_id, trial)]

    def entries(self, platform: str, video_id: str, max_trials: int | None = None) -> list:
        trials = self.trials(platform, video_id)
        if max_trials is not None:
            trials = trials[:max_trials]
        return [self.traces[(platform, video_id, t)] for t in trials]

    def __len__(self) -> int:
        return len(self.traces)


def _split_row(line: str) -> list[str]:
    sep = "\t" if "\t" in line else ","
    return [f.strip() for f in line.split(sep)]


def parse_packet_log(
    stream,
    client: str | None = None,
    *,
    platform: str = "",
    video_id: str = "",
    trial: int = 0,
) -> RawTrace:
    """Parse a packet-field export into a time-normalized RawTrace (first
    packet at t=0). The 4-column form needs the client address to resolve
    direction: rows whose dst is the client are downlink."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    rows: list[tuple[float, str, int]] = []
    n_cols = None
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = _split_row(line)
        if n_cols is None:
            if len(fields) not in (3, 4):
                raise ParseError(f"line {lineno}: expected 3 or 4 columns, got {len(fields)}")
            n_cols = len(fields)
        if len(fields) != n_cols:
            raise ParseError(f"line {lineno}: expected {n_cols} columns, got {len(fields)}")
        try:
            if n_cols == 3:
                t = float(fields[0])
                direction = fields[1].upper()
                size = int(fields[2])
                if direction not in (DOWNLINK, UPLINK):
                    raise ValueError(f"bad direction {fields[1]!r}")
            else:
                if client is None:
                    raise ValueError("4-column form requires a client address")
                t = float(fields[0])
                src, dst = fields[1], fields[2]
                size = int(fields[3])
                if dst == client:
                    direction = DOWNLINK
                elif src == client:
                    direction = UPLINK
                else:
                    raise ValueError(f"client {client!r} matches neither {src!r} nor {dst!r}")
            if size < 0:
                raise ValueError(f"negative size {size}")
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        rows.append((t, direction, size))
    if not rows:
        raise ParseError("empty packet log")
    t0 = rows[0][0]
    try:
        packets = [PacketRecord(time=t - t0, size=s, direction=d) for t, d, s in rows]
        return RawTrace(packets=tuple(packets), platform=platform, video_id=video_id, trial=trial)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def parse_vbr_segments(stream, segment_s: float | None = None) -> tuple[np.ndarray, float]:
    """Parse ``index,bytes`` rows into a byte-per-segment vector. Indices must
    be contiguous from 0. Returns (values, segment_s)."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    values: list[float] = []
    expected = 0
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            if key.strip() == "segment_s":
                try:
                    segment_s = float(val)
                except ValueError:
                    raise ParseError(f"line {lineno}: bad segment_s value {val!r}") from None
            continue
        fields = _split_row(line)
        if len(fields) != 2:
            raise ParseError(f"line {lineno}: expected index,bytes")
        try:
            idx = int(fields[0])
            size = float(fields[1])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        if idx != expected:
            raise ParseError(f"line {lineno}: segment index {idx}, expected {expected}")
        if size < 0:
            raise ParseError(f"line {lineno}: negative segment size")
        values.append(size)
        expected += 1
    if not values:
        raise ParseError("empty VBR segment file")
    if segment_s is None or segment_s <= 0:
        raise ParseError("segment duration missing: pass segment_s or a '# segment_s=' header")
    return np.asarray(values, dtype=np.float64), float(segment_s)


_BINNED_HEADER = ("platform", "video_id", "trial", "bin_s")


def write_binned_csv(fv: FeatureVector, dest) -> None:
    """Inverse of parse_binned_csv; fixed header order, 17 significant digits."""
    if fv.values.size == 0:
        raise ValueError("refusing to write an empty vector")
    own = isinstance(dest, (str, os.PathLike))
    fh = open(dest, "w", encoding="utf-8") if own else dest
    try:
        fh.write(f"# platform={fv.platform}\n")
        fh.write(f"# video_id={fv.video_id}\n")
        fh.write(f"# trial={fv.trial}\n")
        fh.write(f"# bin_s={fv.bin_s:.17g}\n")
        for v in fv.values:
            fh.write(f"{v:.17g}\n")
    finally:
        if own:
            fh.close()


def parse_binned_csv(stream) -> FeatureVector:
    if isinstance(stream, str) and "\n" not in stream and os.path.exists(stream):
        with open(stream, encoding="utf-8") as fh:
            return parse_binned_csv(fh)
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header: dict[str, str] = {}
    values: list[float] = []
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            header[key.strip()] = val.strip()
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric value {line!r}") from None
    missing = [k for k in _BINNED_HEADER if k not in header]
    if missing:
        raise ParseError(f"missing header keys: {missing}")
    if not values:
        raise ParseError("binned trace has no values")
    try:
        return FeatureVector(
            values=np.asarray(values, dtype=np.float64),
            platform=header["platform"],
            video_id=header["video_id"],
            trial=int(header["trial"]),
            bin_s=float(header["bin_s"]),
        )
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def load_manifest(path) -> Dataset:
    """Load every trace referenced by a manifest; all-or-nothing validation."""
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise LoadError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise LoadError(f"manifest is not valid JSON: {exc}") from None
    platforms = doc.get("platforms")
    if not isinstance(platforms, dict) or not platforms:
        raise LoadError("manifest needs a non-empty 'platforms' object")

    traces: dict[tuple[str, str, int], object] = {}
    for platform, videos in platforms.items():
        if not isinstance(videos, dict) or not videos:
            raise LoadError(f"platform {platform!r} lists no videos")
        for video_id, entries in videos.items():
            if not entries:
                raise LoadError(f"{platform}/{video_id} lists no trace files")
            for pos, entry in enumerate(entries):
                kind = entry.get("kind")
                rel = entry.get("path")
                if not rel or kind not in ("packet_log", "binned"):
                    raise LoadError(
                        f"{platform}/{video_id}[{pos}]: entries need a path and kind packet_log|binned"
                    )
                full = os.path.join(base, rel)
                try:
                    with open(full, encoding="utf-8") as fh:
                        if kind == "packet_log":
                            item = parse_packet_log(
                                fh,
                                client=entry.get("client"),
                                platform=platform,
                                video_id=video_id,
                                trial=pos,
                            )
                            trial = pos
                        else:
                            item = parse_binned_csv(fh)
                            if item.platform != platform or item.video_id != video_id:
                                raise LoadError(
                                    f"{rel}: header says {item.platform}/{item.video_id}, "
                                    f"manifest says {platform}/{video_id}"
                                )
                            trial = item.trial
                except FileNotFoundError:
                    raise LoadError(f"{platform}/{video_id}[{pos}]: missing file {rel}") from None
                except ParseError as exc:
                    raise LoadError(f"{rel}: {exc}") from None
                key = (platform, video_id, trial)
                if key in traces:
                    raise LoadError(f"duplicate trace key {key}")
                traces[key] = item

    class_list = sorted({v for _, v, _ in traces})
    return Dataset(traces=traces, class_list=class_list, platform_list=list(platforms))
