"""Per-class figure bundle for an evaluated run.

Three figures per road class, each with a CSV of the plotted values next to
it: a real-vs-generated time overlay for one test pair, amplitude range
summaries (min / p5 / p95 / max), and mean magnitude-spectrum overlays on a
common frequency grid.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .corpus import load_pairs
from .corpus.profiles import CLASS_ORDER
from .metrics import amplitude_range_stats, effective_fs, fft_spectrum, load_generations

log = logging.getLogger(__name__)

SPECTRUM_POINTS = 200


def _spectrum_grid(values: np.ndarray, fs: float, f_grid: np.ndarray) -> np.ndarray:
    spec = fft_spectrum(values, fs)
    return np.interp(f_grid, spec.freqs, spec.magnitudes)


def render_bundle(manifest, generated_dir, out_dir, split: str = "test") -> List[Path]:
    """Write overlay/range/spectrum PNG+CSV per class; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = load_pairs(manifest, split, normalize=False)
    gen_by_pair = load_generations(manifest, generated_dir, [p.pair_id for p in pairs])

    written: List[Path] = []
    for cls in (c.value for c in CLASS_ORDER):
        cls_pairs = [p for p in pairs if p.road_class == cls]
        if not cls_pairs:
            continue
        f_max = min(effective_fs(p.mean_speed) for p in cls_pairs) / 2.0
        f_grid = np.linspace(0.0, f_max, SPECTRUM_POINTS)

        # --- time overlay: first pair of the class
        p0 = cls_pairs[0]
        real0 = p0.signal.values.ravel()
        gen0 = gen_by_pair[p0.pair_id][0].ravel()
        fig, ax = plt.subplots(figsize=(8, 3))
        ax.plot(real0, lw=0.7, label="real")
        ax.plot(gen0, lw=0.7, alpha=0.8, label="generated")
        ax.set_xlabel("sample")
        ax.set_ylabel("acceleration (m/s$^2$)")
        ax.set_title(f"{cls}: tactile window, real vs generated")
        ax.legend()
        written += _save(fig, out_dir / f"overlay_{cls}", np.column_stack([real0, gen0]),
                         "real_ms2,generated_ms2")

        # --- amplitude ranges over the whole class
        real_stats = amplitude_range_stats([p.signal.values for p in cls_pairs])
        gen_stats = amplitude_range_stats(
            [g for p in cls_pairs for g in gen_by_pair[p.pair_id]]
        )
        fig, ax = plt.subplots(figsize=(4, 3.2))
        for x, stats, color in ((0, real_stats, "C0"), (1, gen_stats, "C1")):
            ax.vlines(x, stats["min"], stats["max"], color=color, lw=1)
            ax.add_patch(
                plt.Rectangle(
                    (x - 0.18, stats["p5"]), 0.36, stats["p95"] - stats["p5"],
                    facecolor=color, alpha=0.5,
                )
            )
        ax.set_xticks([0, 1], ["real", "generated"])
        ax.set_ylabel("acceleration (m/s$^2$)")
        ax.set_title(f"{cls}: amplitude range")
        rows = np.array(
            [[real_stats[k], gen_stats[k]] for k in ("min", "p5", "p95", "max", "iqr")]
        )
        written += _save(fig, out_dir / f"range_{cls}", rows, "real,generated")

        # --- mean spectra on the common grid
        real_spec = np.mean(
            [_spectrum_grid(p.signal.values.ravel(), effective_fs(p.mean_speed), f_grid)
             for p in cls_pairs],
            axis=0,
        )
        gen_spec = np.mean(
            [_spectrum_grid(g.ravel(), effective_fs(p.mean_speed), f_grid)
             for p in cls_pairs for g in gen_by_pair[p.pair_id]],
            axis=0,
        )
        fig, ax = plt.subplots(figsize=(6, 3))
        ax.plot(f_grid, real_spec, label="real")
        ax.plot(f_grid, gen_spec, alpha=0.8, label="generated")
        ax.set_xlabel("frequency (Hz)")
        ax.set_ylabel("|FFT|")
        ax.set_title(f"{cls}: mean magnitude spectrum")
        ax.legend()
        written += _save(fig, out_dir / f"spectrum_{cls}",
                         np.column_stack([f_grid, real_spec, gen_spec]),
                         "freq_hz,real,generated")

    log.info("wrote %d plot files under %s", len(written), out_dir)
    return written


def _save(fig, stem: Path, table: np.ndarray, header: str) -> List[Path]:
    png = stem.with_suffix(".png")
    csv = stem.with_suffix(".csv")
    fig.tight_layout()
    fig.savefig(png, dpi=110)
    plt.close(fig)
    np.savetxt(csv, table, delimiter=",", header=header, comments="")
    return [png, csv]
