"""Procedural corpus assembly.

One record per (road class, light condition, index): a synthetic road profile
drives the tire-response simulator, a texture renderer produces the matching
forward view, and the alignment stage cuts the tactile window for the imaged
segment exactly as it would for field recordings. Everything derives from the
master seed, so rebuilding with the same seed reproduces the manifest and all
referenced files bit for bit.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from ..alignment import (
    AlignedPair,
    AlignmentConfig,
    RtkTrack,
    TactileSignal,
    VisualFrame,
    align_pair,
)
from ..errors import ManifestIntegrityError
from ..seeding import derive_key, rng_for
from . import formats
from .formats import DatasetManifest, PairRecord
from .profiles import CLASS_ORDER, LightCondition, RoadClass, synthesize_road_profile
from .textures import render_texture_image
from .tire import simulate_tire_response

log = logging.getLogger(__name__)

CellCounts = Mapping[Tuple[RoadClass, LightCondition], int]

PROFILE_LENGTH_M = 30.0
PROFILE_RESOLUTION_M = 0.01
FRAME_POSITION_M = 2.0  # where along the profile the camera frame is taken
TACTILE_FS = 500.0
TRACK_RATE_HZ = 20.0
IMAGE_SIZE = (64, 64)
NORMALIZATION_PERCENTILE = 99.9
NORMALIZATION_HEADROOM = 0.95

# Day-side per-class counts of the full field corpus, in CLASS_ORDER.
FIELD_DAY_COUNTS = (807, 730, 628, 662, 966, 939)

COUNT_PRESETS: Dict[str, CellCounts] = {
    "default": {(c, l): 40 for c in CLASS_ORDER for l in LightCondition},
    "field-day": {
        **{(c, LightCondition.DAY): n for c, n in zip(CLASS_ORDER, FIELD_DAY_COUNTS)},
        **{(c, LightCondition.NIGHT): 0 for c in CLASS_ORDER},
    },
}


def resolve_counts(counts: Union[int, str, CellCounts, None]) -> CellCounts:
    """Accept a per-cell integer, a preset name, or an explicit mapping."""
    if counts is None:
        counts = "default"
    if isinstance(counts, str):
        if counts not in COUNT_PRESETS:
            raise KeyError(f"unknown counts preset {counts!r}; have {sorted(COUNT_PRESETS)}")
        return COUNT_PRESETS[counts]
    if isinstance(counts, int):
        return {(c, l): counts for c in CLASS_ORDER for l in LightCondition}
    return dict(counts)


def split_sizes(n: int) -> Tuple[int, int, int]:
    """(train, val, test) sizes for an 80/10/10 stratified split of n items."""
    n_test = int(np.floor(0.1 * n))
    n_val = int(np.floor(0.1 * n))
    if n >= 3:
        n_test = max(1, n_test)
        n_val = max(1, n_val)
    return n - n_val - n_test, n_val, n_test


def _assign_splits(n: int, cell_rng: np.random.Generator) -> List[str]:
    n_train, n_val, n_test = split_sizes(n)
    labels = ["train"] * n_train + ["val"] * n_val + ["test"] * n_test
    order = cell_rng.permutation(n)
    out = [""] * n
    for slot, idx in enumerate(order):
        out[idx] = labels[slot]
    return out


def _assign_speeds(
    splits: List[str], speed_range: Tuple[float, float], cell_rng: np.random.Generator
) -> List[float]:
    """Jitter-stratified speeds within each split of a cell.

    An i.i.d. draw can leave a small split (a test split holds only a few
    pairs per cell) clustered at one end of the speed range, which skews every
    per-class spectral statistic computed on it; one stratum per pair keeps
    the draw uniform over the range while guaranteeing even coverage.
    """
    lo, hi = speed_range
    out = [0.0] * len(splits)
    for split in ("train", "val", "test"):
        idx = [i for i, s in enumerate(splits) if s == split]
        if not idx:
            continue
        strata = cell_rng.permutation(len(idx)) + cell_rng.uniform(0.0, 1.0, size=len(idx))
        for k, i in enumerate(idx):
            out[i] = float(lo + (hi - lo) * strata[k] / len(idx))
    return out


def make_pair(
    road_class: RoadClass,
    light: LightCondition,
    index: int,
    master_seed: int,
    speeds: Tuple[float, float] = (5.0, 15.0),
    cfg: Optional[AlignmentConfig] = None,
    speed: Optional[float] = None,
) -> AlignedPair:
    """Synthesize and align a single (image, tactile window) pair."""
    cfg = cfg or AlignmentConfig()
    pair_seed = derive_key(master_seed, "pair", road_class.value, light.value, index)
    if speed is None:
        speed = float(rng_for(master_seed, "speed", road_class.value, light.value, index).uniform(*speeds))

    profile = synthesize_road_profile(road_class, PROFILE_LENGTH_M, PROFILE_RESOLUTION_M, pair_seed)
    stream = simulate_tire_response(profile, speed, TACTILE_FS, seed=pair_seed)

    duration = PROFILE_LENGTH_M / speed
    n_fix = int(np.floor(duration * TRACK_RATE_HZ)) + 1
    t = np.arange(n_fix) / TRACK_RATE_HZ
    track = RtkTrack(t=t, s=speed * t, v=np.full(n_fix, speed), rate_hz=TRACK_RATE_HZ)

    texture = render_texture_image(road_class, light, pair_seed, size=IMAGE_SIZE)
    frame = VisualFrame(t=FRAME_POSITION_M / speed, image=texture.image, frame_id=index)

    pair_id = f"{road_class.value}-{light.value}-{index:04d}"
    return align_pair(frame, track, stream, cfg, road_class.value, light.value, pair_id)


def build_corpus(
    out_dir,
    counts: Union[int, str, CellCounts, None] = None,
    speeds: Tuple[float, float] = (5.0, 15.0),
    seed: int = 0,
    cfg: Optional[AlignmentConfig] = None,
    config_hash: str = "",
) -> DatasetManifest:
    """Generate the full corpus under out_dir and write its manifest.

    Layout: ``images/<pair_id>.png``, ``signals/<pair_id>.vts1`` (raw m/s^2),
    ``manifest.json``. The normalization scale maps the 99.9th percentile of
    |acceleration| over the training split to 0.95.
    """
    out_dir = Path(out_dir)
    counts = resolve_counts(counts)
    cfg = cfg or AlignmentConfig()
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "signals").mkdir(parents=True, exist_ok=True)

    records: List[PairRecord] = []
    train_values: List[np.ndarray] = []
    for road_class in CLASS_ORDER:
        for light in LightCondition:
            n = int(counts.get((road_class, light), 0))
            if n == 0:
                continue
            splits = _assign_splits(n, rng_for(seed, "split", road_class.value, light.value))
            cell_speeds = _assign_speeds(
                splits, speeds, rng_for(seed, "speed", road_class.value, light.value)
            )
            for i in range(n):
                pair = make_pair(road_class, light, i, seed, speeds, cfg, speed=cell_speeds[i])
                image_rel = f"images/{pair.pair_id}.png"
                signal_rel = f"signals/{pair.pair_id}.vts1"
                formats.write_image(out_dir / image_rel, pair.frame.image)
                rate = cfg.resample_len * pair.mean_speed / (cfg.d_far - cfg.d_near)
                formats.write_signal(out_dir / signal_rel, pair.signal.values, rate)
                if splits[i] == "train":
                    # percentile over what load_pairs will see: the stored f32
                    train_values.append(pair.signal.values.astype(np.float32).ravel())
                records.append(
                    PairRecord(
                        pair_id=pair.pair_id,
                        road_class=road_class.value,
                        light=light.value,
                        image_path=image_rel,
                        signal_path=signal_rel,
                        mean_speed=pair.mean_speed,
                        t0=pair.t0,
                        split=splits[i],
                        t1=pair.t1,
                        t2=pair.t2,
                        s0=pair.s0,
                    )
                )

    if train_values:
        magnitude = np.percentile(np.abs(np.concatenate(train_values)), NORMALIZATION_PERCENTILE)
        scale = float(magnitude) / NORMALIZATION_HEADROOM
    else:
        scale = 1.0
    manifest = DatasetManifest(
        records=records,
        normalization={"scale": scale, "offset": 0.0},
        seed=int(seed),
        config_hash=config_hash,
        root=out_dir,
    )
    manifest.save(out_dir / "manifest.json")
    log.info("corpus: %d records at %s (scale %.4f m/s^2)", len(records), out_dir, scale)
    return manifest


def load_pairs(
    manifest: DatasetManifest, split: str, normalize: bool = True
) -> List[AlignedPair]:
    """Load a split's pairs, mapping signals into [-1, 1] via the manifest
    normalization. Out-of-range samples are clipped; their count is logged."""
    scale = float(manifest.normalization["scale"])
    offset = float(manifest.normalization.get("offset", 0.0))
    pairs: List[AlignedPair] = []
    clipped = 0
    for k, rec in enumerate(manifest.split_records(split)):
        image_path = manifest.resolve(rec.image_path)
        signal_path = manifest.resolve(rec.signal_path)
        for p in (image_path, signal_path):
            if not p.exists():
                raise ManifestIntegrityError(f"pair {rec.pair_id}: missing file {p}")
        image = formats.read_image(image_path)
        values, _rate = formats.read_signal(signal_path)
        if normalize:
            values = (values - offset) / scale
            clipped += int(np.count_nonzero(np.abs(values) > 1.0))
            values = np.clip(values, -1.0, 1.0)
        pairs.append(
            AlignedPair(
                frame=VisualFrame(t=rec.t0, image=image, frame_id=k),
                signal=TactileSignal(values=values),
                t0=rec.t0,
                t1=rec.t1,
                t2=rec.t2,
                s0=rec.s0,
                mean_speed=rec.mean_speed,
                road_class=rec.road_class,
                light_condition=rec.light,
                pair_id=rec.pair_id,
            )
        )
    if clipped:
        log.warning("load_pairs(%s): clipped %d out-of-range samples", split, clipped)
    return pairs


def synthesize_session(
    out_dir,
    road_class: RoadClass = RoadClass.ASPHALT,
    light: LightCondition = LightCondition.DAY,
    seed: int = 0,
    speed: float = 10.0,
    video_duration_s: float = 4.0,
    fps: float = 30.0,
    sensor_margin_s: Optional[float] = None,
    cfg: Optional[AlignmentConfig] = None,
) -> Path:
    """Write a raw capture-session directory for the align command.

    Sensors (RTK + tactile) run ``sensor_margin_s`` past the last video frame;
    the default margin covers the far look-ahead at the driving speed, so every
    frame aligns. Pass a smaller margin to emulate a recording that stops
    early.
    """
    cfg = cfg or AlignmentConfig()
    if sensor_margin_s is None:
        sensor_margin_s = cfg.d_far / speed + 0.1
    sensor_duration = video_duration_s + sensor_margin_s

    session_seed = derive_key(seed, "session", road_class.value, light.value)
    profile = synthesize_road_profile(
        road_class, speed * sensor_duration + 1.0, PROFILE_RESOLUTION_M, session_seed
    )
    stream = simulate_tire_response(
        profile, speed, TACTILE_FS, seed=session_seed, duration=sensor_duration
    )
    n_fix = int(np.floor(sensor_duration * TRACK_RATE_HZ)) + 1
    t = np.arange(n_fix) / TRACK_RATE_HZ
    track = RtkTrack(t=t, s=speed * t, v=np.full(n_fix, speed), rate_hz=TRACK_RATE_HZ)

    texture = render_texture_image(road_class, light, session_seed, size=IMAGE_SIZE)
    n_frames = int(round(video_duration_s * fps))
    frames = [
        VisualFrame(t=k / fps, image=texture.image, frame_id=k) for k in range(n_frames)
    ]
    meta = {
        "fps": fps,
        "t_start": 0.0,
        "speed": speed,
        "road_class": road_class.value,
        "light": light.value,
        "seed": int(seed),
    }
    return formats.write_session(out_dir, frames, track, stream, meta)
