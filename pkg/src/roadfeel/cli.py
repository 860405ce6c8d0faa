"""Command-line pipeline driver.

Subcommands: synth, align, train, generate, eval, plot. All take --out (the
run directory with the fixed layout from the pipeline module), an optional
--config JSON file, and an optional --seed override.

Exit codes: 0 ok, 2 configuration error, 3 IO error, 4 data error,
5 training/sampling divergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections import Counter
from dataclasses import replace
from pathlib import Path
from typing import Optional

from . import pipeline, plots
from .alignment import align_batch
from .config import PipelineConfig
from .corpus import DatasetManifest, PairRecord, formats, read_session
from .corpus.profiles import CLASS_ORDER, LightCondition
from .errors import (
    CheckpointMismatch,
    ConfigError,
    DecodeError,
    ManifestIntegrityError,
    SamplingDiverged,
    TrainingDiverged,
    UndefinedSimilarity,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_TRAINING = 5


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "counts", None) is not None:
        counts = args.counts
        cfg = replace(cfg, counts=int(counts) if counts.isdigit() else counts)
    return cfg


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    mpath = pipeline.manifest_path(args.out)
    before = mpath.read_bytes() if mpath.exists() else None
    manifest = pipeline.run_synth(cfg, args.out)
    cell_counts = Counter((r.road_class, r.light) for r in manifest.records)
    for cls in (c.value for c in CLASS_ORDER):
        for light in (l.value for l in LightCondition):
            n = cell_counts.get((cls, light), 0)
            if n:
                print(f"{cls:>8s} {light:<6s} {n:5d}")
    print(f"total records: {len(manifest.records)}")
    if before is not None and mpath.read_bytes() == before:
        print("manifest unchanged")
    print(f"manifest: {mpath}")
    return EXIT_OK


def cmd_align(args) -> int:
    cfg = _load_config(args)
    session = read_session(args.session)
    road_class = session.meta.get("road_class", "unknown")
    light = session.meta.get("light", "unknown")
    pairs, skips = align_batch(
        session.frames, session.track, session.stream, cfg.alignment, road_class, light
    )
    n_frames = len(session.frames)
    print(f"aligned {len(pairs)}/{n_frames} frames ({len(skips)} skipped)")

    out_dir = Path(args.out)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "signals").mkdir(parents=True, exist_ok=True)
    import json

    import numpy as np

    from .metrics import effective_fs

    records = []
    values = []
    for pair in pairs:
        pid = f"{road_class}-{light}-a{pair.frame.frame_id:05d}"
        image_rel, signal_rel = f"images/{pid}.png", f"signals/{pid}.vts1"
        formats.write_image(out_dir / image_rel, pair.frame.image)
        formats.write_signal(
            out_dir / signal_rel,
            pair.signal.values,
            effective_fs(pair.mean_speed, cfg.alignment.resample_len,
                         cfg.alignment.d_near, cfg.alignment.d_far),
        )
        values.append(pair.signal.values.astype(np.float32).ravel())
        records.append(
            PairRecord(
                pair_id=pid, road_class=road_class, light=light,
                image_path=image_rel, signal_path=signal_rel,
                mean_speed=pair.mean_speed, t0=pair.t0, split="train",
                t1=pair.t1, t2=pair.t2, s0=pair.s0,
            )
        )
    scale = float(np.percentile(np.abs(np.concatenate(values)), 99.9) / 0.95) if values else 1.0
    manifest = DatasetManifest(
        records=records,
        normalization={"scale": scale, "offset": 0.0},
        seed=cfg.seed,
        config_hash="",
        root=out_dir,
    )
    mpath = manifest.save(out_dir / "manifest.json")
    (out_dir / "skips.json").write_text(
        json.dumps(
            [{"frame_id": s.frame_id, "t": s.t, "reason": s.reason} for s in skips],
            indent=1,
        )
        + "\n",
        encoding="utf-8",
    )
    print(f"manifest: {mpath}")
    if skips and len(skips) > 0.5 * n_frames:
        print(
            f"error: {len(skips)}/{n_frames} frames skipped — check RTK/tactile clock sync",
            file=sys.stderr,
        )
        return EXIT_DATA
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    runner = {
        "vae": pipeline.run_train_vae,
        "diffusion": pipeline.run_train_diffusion,
        "classifier": pipeline.run_train_classifier,
    }[args.stage]
    ckpt = runner(cfg, args.out)
    print(f"checkpoint: {ckpt}")
    return EXIT_OK


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    written = pipeline.run_generate(cfg, args.out, split=args.split)
    print(f"wrote {len(written)} generated signals under {pipeline.generated_dir(args.out)}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    report_path = pipeline.run_eval(cfg, args.out)
    print(f"report: {report_path}")
    manifest = DatasetManifest.load(pipeline.manifest_path(args.out))
    plots.render_bundle(manifest, pipeline.generated_dir(args.out), Path(args.out) / "plots")
    print(f"plots: {Path(args.out) / 'plots'}")
    return EXIT_OK


def cmd_plot(args) -> int:
    _load_config(args)
    manifest = DatasetManifest.load(pipeline.manifest_path(args.out))
    written = plots.render_bundle(
        manifest, pipeline.generated_dir(args.out), Path(args.out) / "plots"
    )
    print(f"wrote {len(written)} plot files under {Path(args.out) / 'plots'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roadfeel",
        description="visual-to-tactile road signal pipeline: synthesize, align, train, generate, evaluate",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", type=Path, default=None, help="pipeline config JSON")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", type=Path, required=out_required, help="run directory")

    p = sub.add_parser("synth", help="build the procedural corpus")
    common(p)
    p.add_argument("--counts", default=None, help="per-cell count or preset name (e.g. field-day)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("align", help="align a raw capture session")
    common(p)
    p.add_argument("--session", type=Path, required=True, help="session directory")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("train", help="train one model stage")
    common(p)
    p.add_argument("--stage", choices=("vae", "diffusion", "classifier"), required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="generate tactile signals for a split")
    common(p)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="score generations and render the report")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="re-render the plot bundle")
    common(p)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, CheckpointMismatch, KeyError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, PermissionError, IsADirectoryError, OSError) as exc:
        print(f"IO error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ManifestIntegrityError, DecodeError, UndefinedSimilarity) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDiverged, SamplingDiverged) as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAINING


if __name__ == "__main__":
    sys.exit(main())
