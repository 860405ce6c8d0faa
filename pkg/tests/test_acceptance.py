"""Release gates for the pipeline, one printed verdict line per gate.

Each test prints `[gate N] PASS/FAIL — details` straight to the terminal
(bypassing capture) before asserting, so even a red run shows every verdict.
Gates 4 and 6 share one full-scale end-to-end run (480-pair corpus, CPU);
expect roughly 25 minutes for the whole file.
"""

import json
import time
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest
import torch

from roadfeel import pipeline
from roadfeel.alignment import (
    AlignmentConfig,
    RtkTrack,
    TactileStream,
    VisualFrame,
    align_pair,
    arrival_time,
)
from roadfeel.checkpoints import load_classifier, load_vae
from roadfeel.classifier import ClassifierTrainConfig, predict_batch
from roadfeel.config import PipelineConfig, ScheduleConfig
from roadfeel.corpus.build import load_pairs
from roadfeel.corpus.formats import DatasetManifest
from roadfeel.corpus.profiles import CLASS_INDEX, CLASS_ORDER, RoadClass
from roadfeel.diffusion import DiffusionTrainConfig, forward_diffuse, make_schedule, sample
from roadfeel.metrics import (
    amplitude_range_stats,
    band_energy_ratio,
    fft_spectrum,
    fid,
    rmse,
    spectral_similarity,
)
from roadfeel.vae import VaeTrainConfig, reconstruction_rmse

E2E_BUDGET_S = 30 * 60


def verdict(capsys, gate: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[gate {gate}] {'PASS' if ok else 'FAIL'} — {detail}", flush=True)


def constant_track(v: float, duration: float, rate: float = 20.0) -> RtkTrack:
    n = int(duration * rate) + 1
    t = np.arange(n) / rate
    return RtkTrack(t=t, s=v * t, v=np.full(n, v), rate_hz=rate)


def linear_track(v0: float, a: float, duration: float, rate: float = 20.0) -> RtkTrack:
    n = int(duration * rate) + 1
    t = np.arange(n) / rate
    return RtkTrack(t=t, s=v0 * t + 0.5 * a * t**2, v=v0 + a * t, rate_hz=rate)


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    """Default-scale pipeline run shared by gates 4 and 6."""
    out = tmp_path_factory.mktemp("e2e")
    cfg = PipelineConfig(seed=0)
    t_start = time.perf_counter()
    report_path = pipeline.run_all(cfg, out)
    elapsed = time.perf_counter() - t_start
    return SimpleNamespace(
        out=out,
        cfg=cfg,
        elapsed=elapsed,
        report=json.loads(report_path.read_text(encoding="utf-8")),
        manifest=DatasetManifest.load(pipeline.manifest_path(out)),
    )


def test_gate1_diffusion_algebra(capsys):
    t_start = time.perf_counter()
    sched = make_schedule(1000, 1e-4, 0.02)
    rng = np.random.default_rng(0)

    # solving the forward map back for the injected noise must be exact
    x0 = rng.standard_normal((8, 64))
    worst_inversion = 0.0
    for t in (1, 137, 1000):
        z = rng.standard_normal(x0.shape)
        x_t = forward_diffuse(x0, t, z, sched)
        abar = sched.alpha_bar_at(t)
        z_back = (x_t - np.sqrt(abar) * x0) / np.sqrt(1.0 - abar)
        worst_inversion = max(worst_inversion, float(np.abs(z_back - z).max()))

    # cumulative signal fraction at the last step vs a scalar product loop
    product = 1.0
    for b in sched.beta:
        product *= 1.0 - float(b)
    abar_final = sched.alpha_bar_at(1000)
    product_gap = abs(abar_final - product)

    # a denoiser hard-wired for one target must be recovered by full sampling
    target = rng.standard_normal((8, 64))

    def oracle(x_batch, t, conds):
        abar = sched.alpha_bar_at(t)
        return (x_batch - np.sqrt(abar) * target) / np.sqrt(1.0 - abar)

    recovered = sample(oracle, None, sched, target.shape, seed=7)
    recovery_err = float(np.abs(recovered - target).max())

    elapsed = time.perf_counter() - t_start
    ok = (
        worst_inversion < 1e-12
        and product_gap < 1e-6
        and 3.9e-5 < abar_final < 4.1e-5
        and recovery_err < 1e-4
        and elapsed < 10.0
    )
    verdict(
        capsys, "1",
        ok,
        f"noise inversion {worst_inversion:.2e}; signal fraction {abar_final:.4e} "
        f"(product gap {product_gap:.1e}); oracle recovery {recovery_err:.2e}; "
        f"{elapsed:.1f} s",
    )
    assert ok


def test_gate2_alignment_closed_forms(capsys):
    t_start = time.perf_counter()

    # constant speed: distances arrive at t0 + d/v
    track_c = constant_track(10.0, 10.0)
    near = arrival_time(track_c, 5.0, 0.6)
    far = arrival_time(track_c, 5.0, 20.0)
    err_const = max(abs(near - 5.06) / 5.06, abs(far - 7.0) / 7.0)

    # linearly accelerating: v0 t + a t^2/2 = d has a closed-form root
    track_l = linear_track(2.0, 1.0, 10.0)
    expected = -2.0 + np.sqrt(4.0 + 2.0 * 6.0)
    err_linear = abs(arrival_time(track_l, 0.0, 6.0) - expected) / expected

    # a position-indexed field must resample identically at different speeds
    def accel_of_s(s):
        return np.sin(2 * np.pi * s / 2.3) + 0.5 * np.sin(2 * np.pi * s / 5.1)

    cfg = AlignmentConfig()
    truth = accel_of_s(np.linspace(0.6, 20.0, cfg.resample_len))
    frame = VisualFrame(t=0.0, image=np.zeros((32, 32, 3), dtype=np.float32), frame_id=0)
    worst_invariance = 0.0
    signals = []
    for v in (5.0, 12.5):
        duration = 25.0 / v
        track = constant_track(v, duration + 0.5)
        n = int((duration + 0.5) * 500) + 1
        t = np.arange(n) / 500.0
        stream = TactileStream(t0=0.0, fs=500.0, data=accel_of_s(v * t)[np.newaxis, :])
        pair = align_pair(frame, track, stream, cfg)
        signals.append(pair.signal.values[0])
        worst_invariance = max(worst_invariance, float(np.abs(signals[-1] - truth).max()))
    worst_invariance = max(worst_invariance, float(np.abs(signals[0] - signals[1]).max()))

    elapsed = time.perf_counter() - t_start
    ok = err_const < 1e-9 and err_linear < 1e-9 and worst_invariance < 1e-3 and elapsed < 5.0
    verdict(
        capsys, "2",
        ok,
        f"arrival rel err const {err_const:.1e} / linear {err_linear:.1e}; "
        f"speed invariance {worst_invariance:.1e}; {elapsed:.1f} s",
    )
    assert ok


def test_gate3_metric_oracles(capsys):
    t_start = time.perf_counter()
    rng = np.random.default_rng(3)

    # rmse against a scalar loop
    a, b = rng.standard_normal(512), rng.standard_normal(512)
    loop = np.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)) / len(a))
    rmse_gap = abs(rmse(a, b) - loop)

    # spectrum energy bookkeeping (time-domain power == spectral power)
    sig = rng.standard_normal(1024)
    spec = fft_spectrum(sig, 500.0)
    power = (spec.magnitudes[0] ** 2 + 2 * (spec.magnitudes[1:-1] ** 2).sum()
             + spec.magnitudes[-1] ** 2) / len(sig)
    parseval_gap = abs(power - (sig**2).sum())

    # band ratio of a pure tone concentrates where the tone lives
    t = np.arange(2048) / 500.0
    tone = np.sin(2 * np.pi * 8.0 * t)
    in_band = band_energy_ratio(fft_spectrum(tone, 500.0), 0.0, 20.0)
    out_band = band_energy_ratio(fft_spectrum(np.sin(2 * np.pi * 60.0 * t), 500.0), 0.0, 20.0)

    # similarity: identical signals ~1, disjoint narrowband signals ~0
    self_sim = spectral_similarity(tone, tone)
    cross_sim = spectral_similarity(np.sin(2 * np.pi * 5.0 * t), np.sin(2 * np.pi * 40.0 * t))

    # Frechet distance, analytic case: unit Gaussians 3 apart in 1D -> 9.0
    r = np.random.default_rng(1).standard_normal((100_000, 1))
    g = np.random.default_rng(2).standard_normal((100_000, 1)) + 3.0
    fid_analytic = fid(r, g)
    fid_self = fid(r[:5000], r[:5000])

    # amplitude percentiles against a sorted-interpolation oracle
    vals = rng.standard_normal((20, 128))
    stats = amplitude_range_stats(list(vals))
    pool = np.sort(vals.ravel())
    p5_oracle = np.percentile(pool, 5.0)
    amp_gap = abs(stats["p5"] - p5_oracle)

    elapsed = time.perf_counter() - t_start
    ok = (
        rmse_gap < 1e-12
        and parseval_gap < 1e-6
        and in_band > 0.99
        and out_band < 0.01
        and self_sim > 0.999
        and cross_sim < 0.05
        and abs(fid_analytic - 9.0) < 0.1
        and fid_self < 1e-6
        and amp_gap < 1e-9
        and elapsed < 60.0
    )
    verdict(
        capsys, "3",
        ok,
        f"rmse gap {rmse_gap:.1e}; parseval {parseval_gap:.1e}; bands {in_band:.3f}/"
        f"{out_band:.3f}; similarity {self_sim:.3f}/{cross_sim:.3f}; "
        f"frechet {fid_analytic:.3f} (self {fid_self:.1e}); {elapsed:.1f} s",
    )
    assert ok


def test_gate4_end_to_end_quality(capsys, full_run):
    gen = full_run.report["generation"]
    clf = full_run.report["classification"]
    classes = [c.value for c in CLASS_ORDER]

    # (a) the classifier itself must be trustworthy on real held-out data
    model, _ = load_classifier(full_run.out / "checkpoints" / "classifier.pt")
    test_pairs = load_pairs(full_run.manifest, "test")
    y_true = np.array([CLASS_INDEX[RoadClass.from_label(p.road_class)] for p in test_pairs])
    real_acc = float((predict_batch([p.signal for p in test_pairs], model) == y_true).mean())

    gen_acc = clf["accuracy"]
    ssim = gen["spectral_similarity"]["overall"]
    band_diffs = {c: gen["band_energy_ratio_0_20hz"][c]["difference"] for c in classes}
    amp_ratios = {c: gen["amplitude"][c]["p5_p95_width_ratio"] for c in classes}
    worst_band = max(band_diffs, key=lambda c: abs(band_diffs[c]))
    worst_amp = max(amp_ratios, key=lambda c: abs(np.log(amp_ratios[c])))

    checks = {
        "runtime": full_run.elapsed < E2E_BUDGET_S,
        "real-accuracy": real_acc > 0.85,
        "generated-accuracy": gen_acc > 0.5,
        "spectral-similarity": ssim > 0.6,
        "band-energy": all(abs(d) <= 0.15 for d in band_diffs.values()),
        "amplitude-range": all(1 / 1.25 <= r <= 1.25 for r in amp_ratios.values()),
    }
    ok = all(checks.values())
    failing = [name for name, passed in checks.items() if not passed]
    verdict(
        capsys, "4",
        ok,
        f"{full_run.elapsed / 60:.1f} min; real acc {real_acc:.3f}; gen acc {gen_acc:.3f}; "
        f"similarity {ssim:.3f}; band worst {worst_band} {band_diffs[worst_band]:+.3f}; "
        f"amplitude worst {worst_amp} {amp_ratios[worst_amp]:.3f}"
        + (f"; failing: {', '.join(failing)}" if failing else ""),
    )
    assert ok, f"failing checks: {failing}"


def test_gate5_pipeline_determinism(capsys, tmp_path):
    t_start = time.perf_counter()
    cfg = PipelineConfig(
        seed=123,
        counts=3,
        backbone_warmup_steps=20,
        vae_train=VaeTrainConfig(steps=40, log_every=10),
        diffusion_train=DiffusionTrainConfig(steps=20, log_every=5),
        classifier_train=ClassifierTrainConfig(steps=25, batch_size=12, log_every=5),
        schedule=ScheduleConfig(T=200),
    )
    reports = []
    for name in ("a", "b"):
        path = pipeline.run_all(replace(cfg), tmp_path / name)
        reports.append(path.read_bytes())
    elapsed = time.perf_counter() - t_start
    ok = reports[0] == reports[1]
    verdict(
        capsys, "5",
        ok,
        f"two runs, report JSON byte-identical: {ok} ({len(reports[0])} bytes; "
        f"{elapsed:.0f} s)",
    )
    assert ok


def test_gate6_vae_quality(capsys, full_run):
    vae, _ = load_vae(full_run.out / "checkpoints" / "vae.pt")
    val_pairs = load_pairs(full_run.manifest, "val")
    val_rmse = reconstruction_rmse(vae, val_pairs)

    # decoded output must stay strictly inside the open interval (-1, 1),
    # both for reconstructions and for decoded random latents
    peak = 0.0
    with torch.no_grad():
        for p in val_pairs:
            x = torch.from_numpy(np.asarray(p.signal.values, dtype=np.float32))[None]
            peak = max(peak, float(vae.decode(vae.encode(x).mean).abs().max()))
        torch.manual_seed(0)
        z = torch.randn(64, vae.cfg.latent_channels, vae.cfg.latent_len)
        peak = max(peak, float(vae.decode(z).abs().max()))

    ok = val_rmse < 0.1 and peak < 1.0
    verdict(
        capsys, "6",
        ok,
        f"validation reconstruction rmse {val_rmse:.4f} (< 0.1); "
        f"max |decoded| {peak:.6f} (< 1)",
    )
    assert ok
