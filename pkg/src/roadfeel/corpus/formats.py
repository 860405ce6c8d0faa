"""On-disk dataset formats.

Signal file (VTS1, bit-exact): magic ``VTS1``, little-endian u32 channel
count, u32 samples per channel, u32 sample rate in millihertz, then
channel-major float32 data.

RTK track CSV: header ``t,s,v`` (seconds, metres, m/s), one row per fix,
UTF-8, LF line endings.

Dataset manifest: JSON with a mandatory ``schema_version``; record paths are
relative to the manifest's directory so a rebuilt corpus is byte-identical
wherever it lives.

Raw session directory (input to the align command)::

    session/
      meta.json       {"fps": ..., "t_start": ..., "road_class": ..., ...}
      frames/frame_00000.png ...
      rtk.csv
      tactile.vts1    (stream start time in meta.json, key "tactile_t0")
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
from PIL import Image

from ..alignment import RtkTrack, TactileStream, VisualFrame
from ..errors import ManifestIntegrityError

MAGIC = b"VTS1"
SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# VTS1 signal files


def write_signal(path, data: np.ndarray, fs: float) -> None:
    """Write a (channels, n) array as a VTS1 file."""
    data = np.atleast_2d(np.asarray(data))
    channels, n = data.shape
    rate_mhz = int(round(fs * 1000.0))
    payload = data.astype("<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", channels, n, rate_mhz))
        fh.write(payload)


def read_signal(path) -> tuple:
    """Read a VTS1 file -> (data (channels, n) float64, fs Hz)."""
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a VTS1 signal file")
    channels, n, rate_mhz = struct.unpack("<III", raw[4:16])
    expected = 16 + 4 * channels * n
    if len(raw) != expected:
        raise ValueError(f"{path}: truncated signal file ({len(raw)} != {expected} bytes)")
    data = np.frombuffer(raw, dtype="<f4", offset=16).reshape(channels, n)
    return data.astype(np.float64), rate_mhz / 1000.0


def write_stream(path, stream: TactileStream) -> None:
    write_signal(path, stream.data, stream.fs)


def read_stream(path, t0: float = 0.0) -> TactileStream:
    data, fs = read_signal(path)
    return TactileStream(t0=t0, fs=fs, data=data)


# ---------------------------------------------------------------------------
# RTK CSV


def write_rtk_csv(path, track: RtkTrack) -> None:
    lines = ["t,s,v"]
    for t, s, v in zip(track.t, track.s, track.v):
        # float() strips numpy scalar types so repr stays a plain literal
        lines.append(f"{float(t)!r},{float(s)!r},{float(v)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_rtk_csv(path, rate_hz: float = 20.0) -> RtkTrack:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "t,s,v":
        raise ValueError(f"{path}: expected RTK CSV header 't,s,v'")
    rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    return RtkTrack(t=rows[:, 0], s=rows[:, 1], v=rows[:, 2], rate_hz=rate_hz)


# ---------------------------------------------------------------------------
# PNG images


def write_image(path, image: np.ndarray) -> None:
    """Save an H x W x 3 float [0,1] array as 8-bit RGB PNG."""
    arr = np.clip(np.asarray(image), 0.0, 1.0)
    Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8), mode="RGB").save(path)


def read_image(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return arr


# ---------------------------------------------------------------------------
# Dataset manifest


@dataclass
class PairRecord:
    pair_id: str
    road_class: str
    light: str
    image_path: str
    signal_path: str
    mean_speed: float
    t0: float
    split: str
    t1: float = 0.0
    t2: float = 0.0
    s0: float = 0.0


@dataclass
class DatasetManifest:
    records: List[PairRecord]
    normalization: dict  # {"scale": m/s^2 mapped to 1.0, "offset": m/s^2}
    seed: int
    config_hash: str = ""
    schema_version: int = SCHEMA_VERSION
    root: Optional[Path] = field(default=None, compare=False)

    def split_records(self, split: str) -> List[PairRecord]:
        return [r for r in self.records if r.split == split]

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "normalization": dict(self.normalization),
            "records": [asdict(r) for r in self.records],
        }

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(
            json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )
        return path

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        doc = json.loads(path.read_text(encoding="utf-8"))
        if "schema_version" not in doc:
            raise ManifestIntegrityError(f"{path}: manifest missing schema_version")
        if doc["schema_version"] != SCHEMA_VERSION:
            raise ManifestIntegrityError(
                f"{path}: unsupported schema_version {doc['schema_version']}"
            )
        records = [PairRecord(**r) for r in doc["records"]]
        return cls(
            records=records,
            normalization=doc["normalization"],
            seed=doc["seed"],
            config_hash=doc.get("config_hash", ""),
            schema_version=doc["schema_version"],
            root=path.parent,
        )

    def resolve(self, rel_path: str) -> Path:
        if self.root is None:
            return Path(rel_path)
        return self.root / rel_path

    def validate_files(self) -> None:
        """Touch every referenced file; raise naming the first broken pair."""
        seen = set()
        for rec in self.records:
            if rec.pair_id in seen:
                raise ManifestIntegrityError(f"duplicate pair_id {rec.pair_id}")
            seen.add(rec.pair_id)
            for p in (rec.image_path, rec.signal_path):
                if not self.resolve(p).exists():
                    raise ManifestIntegrityError(f"pair {rec.pair_id}: missing file {p}")


# ---------------------------------------------------------------------------
# Raw capture session


@dataclass
class Session:
    frames: List[VisualFrame]
    track: RtkTrack
    stream: TactileStream
    meta: dict


def write_session(
    out_dir,
    frames: List[VisualFrame],
    track: RtkTrack,
    stream: TactileStream,
    meta: dict,
) -> Path:
    out_dir = Path(out_dir)
    (out_dir / "frames").mkdir(parents=True, exist_ok=True)
    for frame in frames:
        write_image(out_dir / "frames" / f"frame_{frame.frame_id:05d}.png", frame.image)
    write_rtk_csv(out_dir / "rtk.csv", track)
    write_stream(out_dir / "tactile.vts1", stream)
    doc = dict(meta)
    doc.setdefault("tactile_t0", stream.t0)
    doc["frame_count"] = len(frames)
    doc["frame_times"] = [frame.t for frame in frames]
    (out_dir / "meta.json").write_text(json.dumps(doc, indent=1, sort_keys=True), encoding="utf-8")
    return out_dir


def read_session(session_dir) -> Session:
    session_dir = Path(session_dir)
    meta_path = session_dir / "meta.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"missing session metadata: {meta_path}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    rtk_path = session_dir / "rtk.csv"
    if not rtk_path.exists():
        raise FileNotFoundError(f"missing RTK file: {rtk_path}")
    track = read_rtk_csv(rtk_path)
    tactile_path = session_dir / "tactile.vts1"
    if not tactile_path.exists():
        raise FileNotFoundError(f"missing tactile stream: {tactile_path}")
    stream = read_stream(tactile_path, t0=float(meta.get("tactile_t0", 0.0)))
    frames = []
    for k, t in enumerate(meta["frame_times"]):
        image = read_image(session_dir / "frames" / f"frame_{k:05d}.png")
        frames.append(VisualFrame(t=float(t), image=image, frame_id=k))
    return Session(frames=frames, track=track, stream=stream, meta=meta)
