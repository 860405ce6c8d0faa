"""Evaluation metrics for generated tactile signals.

RMSE and spectral similarity compare a generated signal with its paired real
one; FID compares embedding distributions of whole sets (embeddings come from
the road classifier's penultimate layer); band-energy ratios and amplitude
order statistics summarize physical plausibility. build_report assembles the
per-class / overall table for a test split plus its generations.

Spectral similarity is the cosine between positive-frequency FFT magnitude
spectra (1.0 = identical shape); the complementary distance (1 - cosine) is
exposed as spectral_distance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import ShapeError, UndefinedSimilarity

log = logging.getLogger(__name__)

LOW_BAND_HZ = (0.0, 20.0)
REPORT_SCHEMA_VERSION = 1


def _values(signal) -> np.ndarray:
    arr = np.asarray(getattr(signal, "values", signal), dtype=np.float64)
    return arr.ravel()


def rmse(real, gen) -> float:
    a, b = _values(real), _values(gen)
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


@dataclass
class SpectrumResult:
    """Positive-frequency magnitude spectrum; K = floor(N/2)+1 bins."""

    freqs: np.ndarray
    magnitudes: np.ndarray
    fs: float


def fft_spectrum(signal, fs: float) -> SpectrumResult:
    x = _values(signal)
    if x.size < 2:
        raise ShapeError("need at least 2 samples for a spectrum")
    mags = np.abs(np.fft.rfft(x))
    freqs = np.fft.rfftfreq(x.size, d=1.0 / fs)
    return SpectrumResult(freqs=freqs, magnitudes=mags, fs=fs)


def spectral_similarity(real, gen) -> float:
    """Cosine of FFT magnitude spectra, in [0, 1]; 1 for identical shapes."""
    a = np.abs(np.fft.rfft(_values(real)))
    b = np.abs(np.fft.rfft(_values(gen)))
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise UndefinedSimilarity("spectral similarity undefined for an all-zero signal")
    return float(np.dot(a, b) / (na * nb))


def spectral_distance(real, gen) -> float:
    """1 - cosine of magnitude spectra (0 for identical shapes)."""
    return 1.0 - spectral_similarity(real, gen)


def fid(real_set: np.ndarray, gen_set: np.ndarray, eps: float = 1e-6) -> float:
    """Frechet distance between Gaussian fits of two embedding sets (n, d).

    ||mu_r - mu_g||^2 + tr(S_r + S_g - 2 (S_r S_g)^(1/2)); eps * I shrinkage is
    always applied so degenerate covariances never raise.
    """
    real_set = np.atleast_2d(np.asarray(real_set, dtype=np.float64))
    gen_set = np.atleast_2d(np.asarray(gen_set, dtype=np.float64))
    if real_set.shape[1] != gen_set.shape[1]:
        raise ShapeError(
            f"embedding dims differ: {real_set.shape[1]} vs {gen_set.shape[1]}"
        )
    mu_r, mu_g = real_set.mean(axis=0), gen_set.mean(axis=0)
    dim = real_set.shape[1]
    sigma_r = np.cov(real_set, rowvar=False).reshape(dim, dim) + eps * np.eye(dim)
    sigma_g = np.cov(gen_set, rowvar=False).reshape(dim, dim) + eps * np.eye(dim)

    covmean = scipy.linalg.sqrtm(sigma_r @ sigma_g)
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    diff = mu_r - mu_g
    value = float(diff @ diff + np.trace(sigma_r) + np.trace(sigma_g) - 2.0 * np.trace(covmean))
    return max(value, 0.0)


def embed_signal(signal, classifier) -> np.ndarray:
    """Penultimate-layer activations of the trained road classifier."""
    from .classifier import embed

    return embed(signal, classifier)


def band_energy_ratio(spectrum: SpectrumResult, f_lo: float, f_hi: float) -> float:
    """Fraction of squared spectral magnitude inside [f_lo, f_hi).

    The band is half-open so adjacent bands tile the axis without double
    counting; a band ending at the Nyquist frequency includes it.
    """
    nyquist = spectrum.fs / 2.0
    if not 0.0 <= f_lo < f_hi <= nyquist + 1e-12:
        raise ValueError(f"need 0 <= f_lo < f_hi <= fs/2, got [{f_lo}, {f_hi}]")
    power = spectrum.magnitudes**2
    total = power.sum()
    if total == 0.0:
        raise UndefinedSimilarity("band energy undefined for a zero spectrum")
    mask = (spectrum.freqs >= f_lo) & (spectrum.freqs < f_hi)
    if f_hi >= nyquist - 1e-12:
        mask |= spectrum.freqs >= f_hi
    return float(power[mask].sum() / total)


def amplitude_range_stats(signals: Sequence) -> Dict[str, float]:
    """Order statistics over all samples of a set of signals (m/s^2)."""
    if len(signals) == 0:
        raise ValueError("empty signal set")
    pooled = np.concatenate([_values(s) for s in signals])
    q1, q3 = np.percentile(pooled, [25.0, 75.0])
    return {
        "min": float(pooled.min()),
        "max": float(pooled.max()),
        "p5": float(np.percentile(pooled, 5.0)),
        "p95": float(np.percentile(pooled, 95.0)),
        "iqr": float(q3 - q1),
    }


# ---------------------------------------------------------------------------
# Report assembly


def effective_fs(mean_speed: float, resample_len: int = 1024, d_near: float = 0.6, d_far: float = 20.0) -> float:
    """Sample rate equivalent of a spatially resampled window: the window
    spans (d_far - d_near) metres traversed at mean_speed."""
    return resample_len * mean_speed / (d_far - d_near)


def load_generations(manifest, generated_dir, pair_ids: Sequence[str]) -> Dict[str, List[np.ndarray]]:
    """Generated signals per pair_id from <generated_dir>/<pair_id>.gen*.vts1.

    Raises ManifestIntegrityError naming every pair with no generation.
    """
    from .corpus import formats
    from .errors import ManifestIntegrityError

    generated_dir = Path(generated_dir)
    out: Dict[str, List[np.ndarray]] = {}
    missing = []
    for pid in pair_ids:
        paths = sorted(generated_dir.glob(f"{pid}.gen*.vts1"))
        if not paths:
            missing.append(pid)
            continue
        out[pid] = [formats.read_signal(p)[0] for p in paths]
    if missing:
        raise ManifestIntegrityError(f"no generated signals for pairs: {', '.join(missing)}")
    return out


def build_report(
    manifest,
    generated_dir,
    classifier_model,
    split: str = "test",
    class_order: Optional[Sequence[str]] = None,
) -> dict:
    """Per-class + overall metric table for a split and its generated signals.

    Point metrics (rmse, spectral similarity) are in normalized units and
    averaged per class; FID runs on classifier embeddings; amplitude stats are
    in m/s^2. The classification block scores generations with the
    real-data-trained classifier.
    """
    from .classifier import evaluate_generated
    from .corpus import load_pairs
    from .corpus.profiles import CLASS_ORDER

    class_order = list(class_order or [c.value for c in CLASS_ORDER])
    pairs = load_pairs(manifest, split, normalize=True)
    if not pairs:
        raise ValueError(f"split {split!r} is empty")
    gen_by_pair = load_generations(manifest, generated_dir, [p.pair_id for p in pairs])
    scale = float(manifest.normalization["scale"])
    offset = float(manifest.normalization.get("offset", 0.0))

    per_pair = []
    for p in pairs:
        real_n = p.signal.values.ravel()
        fs = effective_fs(p.mean_speed)
        for g_raw in gen_by_pair[p.pair_id]:
            gen_n = ((g_raw - offset) / scale).ravel()
            per_pair.append(
                {
                    "pair": p,
                    "cls": p.road_class,
                    "real_n": real_n,
                    "gen_n": gen_n,
                    "gen_raw": g_raw.ravel(),
                    "fs": fs,
                    "rmse": rmse(real_n, gen_n),
                    "ssim": spectral_similarity(real_n, gen_n),
                    "band_real": band_energy_ratio(fft_spectrum(real_n, fs), *LOW_BAND_HZ),
                    "band_gen": band_energy_ratio(fft_spectrum(gen_n, fs), *LOW_BAND_HZ),
                }
            )

    emb_real = {p.pair_id: embed_signal(p.signal.values, classifier_model) for p in pairs}

    def _table(rows, key):
        table = {}
        for cls in class_order:
            vals = [r[key] for r in rows if r["cls"] == cls]
            table[cls] = float(np.mean(vals)) if vals else None
        table["overall"] = float(np.mean([r[key] for r in rows]))
        return table

    def _fid_for(rows, pair_subset):
        real_e = np.stack([emb_real[p.pair_id] for p in pair_subset])
        gen_e = np.stack([embed_signal(r["gen_n"], classifier_model) for r in rows])
        return fid(real_e, gen_e)

    fid_table = {}
    for cls in class_order:
        rows = [r for r in per_pair if r["cls"] == cls]
        cls_pairs = [p for p in pairs if p.road_class == cls]
        fid_table[cls] = _fid_for(rows, cls_pairs) if rows else None
    fid_table["overall"] = _fid_for(per_pair, pairs)

    band_table, amp_table = {}, {}
    for cls in class_order + ["overall"]:
        rows = [r for r in per_pair if cls == "overall" or r["cls"] == cls]
        cls_pairs = [p for p in pairs if cls == "overall" or p.road_class == cls]
        if not rows:
            band_table[cls] = amp_table[cls] = None
            continue
        br = float(np.mean([r["band_real"] for r in rows]))
        bg = float(np.mean([r["band_gen"] for r in rows]))
        band_table[cls] = {"real": br, "generated": bg, "difference": bg - br}
        # amplitude stats in physical units
        real_stats = amplitude_range_stats(
            [p.signal.values * scale + offset for p in cls_pairs]
        )
        gen_stats = amplitude_range_stats([r["gen_raw"] for r in rows])
        width_real = real_stats["p95"] - real_stats["p5"]
        width_gen = gen_stats["p95"] - gen_stats["p5"]
        ratio = width_gen / width_real if width_real > 0 else float("inf")
        amp_table[cls] = {
            "real": real_stats,
            "generated": gen_stats,
            "p5_p95_width_ratio": float(ratio),
        }

    gen_signals = [r["gen_n"] for r in per_pair]
    gen_labels = [r["cls"] for r in per_pair]
    clf_metrics = evaluate_generated(gen_signals, gen_labels, classifier_model)

    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "split": split,
        "config_hash": manifest.config_hash,
        "embedder": "road-classifier-penultimate-128",
        "units_note": "rmse/spectral_similarity in normalized units; amplitude in m/s^2",
        "generation": {
            "rmse": _table(per_pair, "rmse"),
            "fid": fid_table,
            "spectral_similarity": _table(per_pair, "ssim"),
            "band_energy_ratio_0_20hz": band_table,
            "amplitude": amp_table,
        },
        "classification": {
            "accuracy": clf_metrics.accuracy,
            "precision": clf_metrics.precision,
            "recall": clf_metrics.recall,
            "f1": clf_metrics.f1,
            "confusion": clf_metrics.confusion.tolist(),
        },
    }
