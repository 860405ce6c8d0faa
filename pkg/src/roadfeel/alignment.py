"""Spatiotemporal pairing of forward road imagery with tire vibration windows.

A camera frame captured at time t0 shows the road from d_near to d_far metres
ahead of the vehicle. The vehicle reaches those two points at times t1 and t2,
found by integrating the recorded speed profile. The accelerometer samples
inside [t1, t2] are the excitation produced by the pictured segment; they are
re-indexed from time to travelled arc length and resampled onto a fixed-length
grid, so windows driven at different speeds describe the same stretch of road
the same way.

Speed is treated as piecewise linear between positioning samples, which makes
trapezoidal integration exact on constant and linearly varying speed profiles,
and makes arrival-time lookup the exact inverse of position lookup.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateSegment, InsufficientTrack, ShapeError, WindowOutOfRange

log = logging.getLogger(__name__)

# Tolerance (in sample-index units) absorbing float error when a window
# boundary lands exactly on an accelerometer sample.
_INDEX_DECIMALS = 9


@dataclass(frozen=True)
class RtkSample:
    """One positioning fix: time [s], cumulative arc length [m], speed [m/s]."""

    t: float
    s: float
    v: float


@dataclass
class RtkTrack:
    """Ordered positioning fixes with piecewise-linear speed between them."""

    t: np.ndarray
    s: np.ndarray
    v: np.ndarray
    rate_hz: float = 20.0

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.s = np.asarray(self.s, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.t.size < 2:
            raise ValueError("track needs at least 2 samples")
        if not (np.diff(self.t) > 0).all():
            raise ValueError("track times must be strictly increasing")
        if (self.v < 0).any():
            raise ValueError("track speeds must be non-negative")
        if (np.diff(self.s) < -1e-9).any():
            raise ValueError("track positions must be non-decreasing")

    @classmethod
    def from_samples(cls, samples: Sequence[RtkSample], rate_hz: float = 20.0) -> "RtkTrack":
        t = np.array([p.t for p in samples])
        s = np.array([p.s for p in samples])
        v = np.array([p.v for p in samples])
        return cls(t=t, s=s, v=v, rate_hz=rate_hz)

    @property
    def t_start(self) -> float:
        return float(self.t[0])

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def check_consistency(self, tol: float = 1e-6) -> None:
        """Verify the position column matches trapezoidal integration of speed."""
        integrated = self.s[0] + np.concatenate(
            ([0.0], np.cumsum(0.5 * (self.v[1:] + self.v[:-1]) * np.diff(self.t)))
        )
        err = np.max(np.abs(integrated - self.s))
        scale = max(1.0, float(self.s[-1] - self.s[0]))
        if err > tol * scale:
            raise ValueError(f"position column inconsistent with speed integral (err={err:.3g} m)")

    def _cumdist(self) -> np.ndarray:
        # distance covered from the first fix up to each knot (trapezoid)
        return np.concatenate(
            ([0.0], np.cumsum(0.5 * (self.v[1:] + self.v[:-1]) * np.diff(self.t)))
        )


@dataclass
class TactileStream:
    """Evenly sampled acceleration stream, one row per channel, in m/s^2."""

    t0: float
    fs: float
    data: np.ndarray  # (channels, n)

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=np.float64))
        if self.fs <= 0:
            raise ValueError("fs must be positive")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def t_end(self) -> float:
        return self.t0 + (self.n_samples - 1) / self.fs


@dataclass
class VisualFrame:
    """One camera frame: capture time, H x W x 3 image in [0, 1], ordinal id."""

    t: float
    image: np.ndarray
    frame_id: int = 0

    def __post_init__(self):
        self.image = np.asarray(self.image)
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise ValueError(f"image must be H x W x 3, got {self.image.shape}")


@dataclass(frozen=True)
class AlignmentConfig:
    d_near: float = 0.6
    d_far: float = 20.0
    resample_len: int = 1024
    channel_select: tuple = (0,)

    def __post_init__(self):
        if not 0 < self.d_near < self.d_far:
            raise ValueError("need 0 < d_near < d_far")
        if self.resample_len < 2:
            raise ValueError("resample_len must be >= 2")


@dataclass
class TactileSignal:
    """Fixed-length vibration sequence, shape (channels, length)."""

    values: np.ndarray
    units: str = "m/s^2"

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]


@dataclass
class TactileWindow:
    """Raw accelerometer slice with per-sample capture times."""

    times: np.ndarray
    values: np.ndarray  # (channels, n)
    fs: float


@dataclass
class AlignedPair:
    """One visual frame plus the spatially resampled tactile response of the
    road segment it shows."""

    frame: VisualFrame
    signal: TactileSignal
    t0: float
    t1: float
    t2: float
    s0: float
    mean_speed: float
    road_class: str = "unknown"
    light_condition: str = "unknown"
    pair_id: Optional[str] = None


@dataclass
class SkipRecord:
    frame_id: int
    t: float
    reason: str


def extract_keyframes(video: Sequence[VisualFrame], stride: int) -> list:
    """Every stride-th frame of the sequence, keeping original timestamps."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return list(video[::stride])


def _segment_time_for_distance(v_a: float, v_b: float, dt: float, r: float) -> float:
    """Time to cover distance r inside a segment where speed goes linearly
    v_a -> v_b over dt. Assumes r is coverable within the segment."""
    if r <= 0:
        return 0.0
    m = (v_b - v_a) / dt
    if abs(m) < 1e-12:
        return r / v_a
    disc = v_a * v_a + 2.0 * m * r
    # disc >= v_b^2 at the far end by assumption; clip float dust
    return (-v_a + np.sqrt(max(disc, 0.0))) / m


def arrival_time(track: RtkTrack, t0: float, distance: float) -> float:
    """Smallest t* >= t0 with integral of v over [t0, t*] equal to `distance`.

    Speed is piecewise linear between track samples, so the result is exact on
    constant and linearly varying speed profiles.
    """
    if distance < 0:
        raise ValueError("distance must be >= 0")
    if not (track.t_start <= t0 <= track.t_end):
        # a frame outside the recorded span is a coverage failure, same as a
        # track that ends mid-look-ahead — callers treat both as skippable
        raise InsufficientTrack(
            f"t0={t0} outside track span [{track.t_start}, {track.t_end}]"
        )
    if distance == 0:
        return float(t0)

    i = int(np.searchsorted(track.t, t0, side="right")) - 1
    i = min(i, track.t.size - 2)
    remaining = float(distance)
    # partial first segment: speed at t0 by linear interpolation
    while i < track.t.size - 1:
        ta = max(float(track.t[i]), t0)
        tb = float(track.t[i + 1])
        if tb <= ta:
            i += 1
            continue
        frac = (ta - track.t[i]) / (track.t[i + 1] - track.t[i])
        v_a = float(track.v[i] + frac * (track.v[i + 1] - track.v[i]))
        v_b = float(track.v[i + 1])
        seg = 0.5 * (v_a + v_b) * (tb - ta)
        if seg >= remaining - 1e-12 * max(1.0, distance):
            return ta + _segment_time_for_distance(v_a, v_b, tb - ta, remaining)
        remaining -= seg
        i += 1
    raise InsufficientTrack(
        f"track ends at t={track.t_end:.3f}s with {remaining:.3f} m of {distance:.3f} m uncovered"
    )


def position_at(track: RtkTrack, t: float) -> float:
    """Arc-length position at time t: first fix position plus the speed integral."""
    return float(positions_at(track, np.asarray([t]))[0])


def positions_at(track: RtkTrack, times: np.ndarray) -> np.ndarray:
    """Vectorized arc-length positions for an array of times within the span."""
    times = np.asarray(times, dtype=np.float64)
    if times.size and (times.min() < track.t_start - 1e-9 or times.max() > track.t_end + 1e-9):
        raise ValueError("queried time outside track span")
    times = np.clip(times, track.t_start, track.t_end)
    cum = track._cumdist()
    idx = np.clip(np.searchsorted(track.t, times, side="right") - 1, 0, track.t.size - 2)
    ta = track.t[idx]
    dt_seg = track.t[idx + 1] - ta
    tau = times - ta
    v_a = track.v[idx]
    m = (track.v[idx + 1] - v_a) / dt_seg
    return track.s[0] + cum[idx] + v_a * tau + 0.5 * m * tau * tau


def extract_tactile_window(stream: TactileStream, t1: float, t2: float) -> TactileWindow:
    """Samples with capture time in [t1, t2]: first at or after t1, last at or
    before t2. Boundary hits are resolved with a 1e-9 index tolerance."""
    if t1 >= t2:
        raise ValueError("need t1 < t2")
    i0 = int(np.ceil(np.round((t1 - stream.t0) * stream.fs, _INDEX_DECIMALS)))
    i1 = int(np.floor(np.round((t2 - stream.t0) * stream.fs, _INDEX_DECIMALS)))
    if i0 < 0 or i1 >= stream.n_samples:
        raise WindowOutOfRange(
            f"window [{t1:.3f}, {t2:.3f}]s outside stream span "
            f"[{stream.t0:.3f}, {stream.t_end:.3f}]s"
        )
    if i1 < i0:
        raise WindowOutOfRange(f"no samples inside window [{t1:.6f}, {t2:.6f}]s")
    times = stream.t0 + np.arange(i0, i1 + 1) / stream.fs
    return TactileWindow(times=times, values=stream.data[:, i0 : i1 + 1].copy(), fs=stream.fs)


def resample_spatially(
    raw: TactileWindow, track: RtkTrack, t1: float, t2: float, n: int
) -> TactileSignal:
    """Re-index the raw window by travelled arc length and linearly interpolate
    onto n equally spaced positions spanning [s(t1), s(t2)].

    Output length is n regardless of vehicle speed. Grid points slightly
    outside the raw sample range (the window's first/last samples need not
    land exactly on t1/t2) hold the edge value.
    """
    if raw.values.size == 0:
        raise ValueError("raw window is empty")
    if n < 2:
        raise ValueError("n must be >= 2")
    s_lo = position_at(track, t1)
    s_hi = position_at(track, t2)
    if s_hi - s_lo < 1e-9:
        raise DegenerateSegment(f"window spans {s_hi - s_lo:.3g} m of road (vehicle stationary?)")
    s_raw = positions_at(track, raw.times)
    # a mid-window stop yields repeated positions; keep the first occurrence
    keep = np.concatenate(([True], np.diff(s_raw) > 0))
    s_raw = s_raw[keep]
    grid = np.linspace(s_lo, s_hi, n)
    out = np.vstack([np.interp(grid, s_raw, ch[keep]) for ch in raw.values])
    return TactileSignal(values=out)


def align_pair(
    frame: VisualFrame,
    track: RtkTrack,
    stream: TactileStream,
    cfg: AlignmentConfig,
    road_class: str = "unknown",
    light_condition: str = "unknown",
    pair_id: Optional[str] = None,
) -> AlignedPair:
    """Pair one frame with the tactile window of the road segment it shows."""
    t0 = frame.t
    t1 = arrival_time(track, t0, cfg.d_near)
    t2 = arrival_time(track, t0, cfg.d_far)
    window = extract_tactile_window(stream, t1, t2)
    selected = TactileWindow(
        times=window.times,
        values=window.values[list(cfg.channel_select), :],
        fs=window.fs,
    )
    signal = resample_spatially(selected, track, t1, t2, cfg.resample_len)
    return AlignedPair(
        frame=frame,
        signal=signal,
        t0=t0,
        t1=t1,
        t2=t2,
        s0=position_at(track, t0),
        mean_speed=(cfg.d_far - cfg.d_near) / (t2 - t1),
        road_class=road_class,
        light_condition=light_condition,
        pair_id=pair_id,
    )


def align_batch(
    frames: Sequence[VisualFrame],
    track: RtkTrack,
    stream: TactileStream,
    cfg: AlignmentConfig,
    road_class: str = "unknown",
    light_condition: str = "unknown",
) -> tuple:
    """Align every frame, skipping (with a logged reason) frames whose
    look-ahead window runs past the recorded data."""
    pairs, skips = [], []
    for frame in frames:
        try:
            pairs.append(align_pair(frame, track, stream, cfg, road_class, light_condition))
        except (InsufficientTrack, WindowOutOfRange, DegenerateSegment) as exc:
            reason = f"{type(exc).__name__}: {exc}"
            log.info("skipping frame %d at t=%.3fs: %s", frame.frame_id, frame.t, reason)
            skips.append(SkipRecord(frame_id=frame.frame_id, t=frame.t, reason=reason))
    return pairs, skips
