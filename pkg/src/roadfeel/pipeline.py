"""End-to-end orchestration: synth -> train x3 -> generate -> eval.

Each stage writes its artifacts under one output directory with a fixed
layout and echoes the pipeline config hash, so later stages can verify they
are consuming artifacts of the same run:

    out/
      corpus/manifest.json  images/  signals/
      checkpoints/vae.pt(.json)  diffusion.pt(.json)  classifier.pt(.json)
      checkpoints/loss_<stage>.csv
      generated/<pair_id>.gen<k>.vts1
      report.json  plots/
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import checkpoints, diffusion, metrics, vision
from .classifier import train_classifier
from .config import PipelineConfig, canonical_json, config_hash
from .corpus import CLASS_INDEX, DatasetManifest, build_corpus, formats, load_pairs
from .errors import ConfigError
from .seeding import derive_key
from .vae import train_vae

log = logging.getLogger(__name__)


def corpus_dir(out_dir) -> Path:
    return Path(out_dir) / "corpus"


def manifest_path(out_dir) -> Path:
    return corpus_dir(out_dir) / "manifest.json"


def checkpoint_dir(out_dir) -> Path:
    return Path(out_dir) / "checkpoints"


def generated_dir(out_dir) -> Path:
    return Path(out_dir) / "generated"


def write_loss_csv(path, history: List[float], interval: int) -> Path:
    """One row per completed logging interval: step index and interval mean."""
    path = Path(path)
    lines = ["step,loss"]
    for end in range(interval, len(history) + 1, interval):
        chunk = history[end - interval : end]
        lines.append(f"{end},{np.mean(chunk):.8f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def run_synth(cfg: PipelineConfig, out_dir) -> DatasetManifest:
    return build_corpus(
        corpus_dir(out_dir),
        counts=cfg.counts,
        speeds=cfg.speeds,
        seed=cfg.seed,
        cfg=cfg.alignment,
        config_hash=config_hash(cfg),
    )


def _load_manifest(out_dir) -> DatasetManifest:
    return DatasetManifest.load(manifest_path(out_dir))


def run_train_vae(cfg: PipelineConfig, out_dir, manifest: Optional[DatasetManifest] = None) -> Path:
    manifest = manifest or _load_manifest(out_dir)
    train = load_pairs(manifest, "train")
    model, history = train_vae(train, cfg.vae, cfg.vae_train)
    ckpt = checkpoints.save_vae(
        checkpoint_dir(out_dir) / "vae.pt", model, history, cfg.seed, manifest.config_hash
    )
    write_loss_csv(
        checkpoint_dir(out_dir) / "loss_vae.csv", history["loss"], cfg.vae_train.log_every
    )
    return ckpt


def run_train_diffusion(
    cfg: PipelineConfig, out_dir, manifest: Optional[DatasetManifest] = None
) -> Path:
    manifest = manifest or _load_manifest(out_dir)
    vae_path = checkpoint_dir(out_dir) / "vae.pt"
    if not vae_path.exists():
        raise ConfigError(
            f"diffusion training needs the VAE checkpoint first (missing {vae_path}); "
            "run the vae stage"
        )
    vae_model, vae_sidecar = checkpoints.load_vae(vae_path)
    checkpoints.verify_lineage(vae_sidecar, {"config_hash": manifest.config_hash})

    train = load_pairs(manifest, "train")
    backbone = vision.load_backbone(cfg.backbone_kind, cfg.denoiser.cond_dim, seed=cfg.seed)
    if cfg.backbone_warmup_steps > 0:
        vision.pretrain_backbone(
            train, backbone, CLASS_INDEX, steps=cfg.backbone_warmup_steps, seed=cfg.seed
        )
    schedule = cfg.schedule.build()
    model, history, latent_scale = diffusion.train_diffusion(
        train, vae_model, backbone, cfg.denoiser, schedule, cfg.diffusion_train
    )
    ckpt = checkpoints.save_diffusion(
        checkpoint_dir(out_dir) / "diffusion.pt",
        model,
        backbone,
        cfg.backbone_kind,
        schedule.to_dict(),
        latent_scale,
        vae_sidecar["config"],
        history,
        cfg.seed,
        manifest.config_hash,
    )
    write_loss_csv(
        checkpoint_dir(out_dir) / "loss_diffusion.csv",
        history["loss"],
        cfg.diffusion_train.log_every,
    )
    return ckpt


def run_train_classifier(
    cfg: PipelineConfig, out_dir, manifest: Optional[DatasetManifest] = None
) -> Path:
    manifest = manifest or _load_manifest(out_dir)
    train = load_pairs(manifest, "train")
    model, history = train_classifier(
        [p.signal.values for p in train],
        [p.road_class for p in train],
        cfg.classifier,
        cfg.classifier_train,
    )
    ckpt = checkpoints.save_classifier(
        checkpoint_dir(out_dir) / "classifier.pt", model, history, cfg.seed, manifest.config_hash
    )
    write_loss_csv(
        checkpoint_dir(out_dir) / "loss_classifier.csv",
        history["loss"],
        cfg.classifier_train.log_every,
    )
    return ckpt


def run_generate(
    cfg: PipelineConfig, out_dir, manifest: Optional[DatasetManifest] = None, split: str = "test"
) -> List[Path]:
    """One generated VTS1 file per (pair, generation index), deterministic in
    (master seed, pair_id, index) regardless of batching."""
    manifest = manifest or _load_manifest(out_dir)
    vae_model, vae_sidecar = checkpoints.load_vae(checkpoint_dir(out_dir) / "vae.pt")
    denoiser, backbone, diff_sidecar = checkpoints.load_diffusion(
        checkpoint_dir(out_dir) / "diffusion.pt"
    )
    checkpoints.verify_lineage(vae_sidecar, diff_sidecar, {"config_hash": manifest.config_hash})
    checkpoints.check_vae_match(diff_sidecar, vae_sidecar)
    schedule = cfg.schedule.build()
    checkpoints.check_schedule_match(diff_sidecar, schedule.to_dict())
    latent_scale = float(diff_sidecar["latent_scale"])

    pairs = load_pairs(manifest, split)
    gen_dir = generated_dir(out_dir)
    gen_dir.mkdir(parents=True, exist_ok=True)
    shape = (cfg.denoiser.in_channels, cfg.denoiser.length)

    import torch

    conds = vision.extract_features_batch(pairs, backbone)
    written = []
    for k in range(cfg.generations_per_pair):
        seeds = [derive_key(cfg.seed, "generate", p.pair_id, k) for p in pairs]
        latents = diffusion.sample_batch(
            diffusion.torch_denoiser(denoiser), conds, schedule, shape, seeds
        )
        with torch.no_grad():
            decoded = (
                vae_model.decode(torch.from_numpy(latents * latent_scale).float())
                .double()
                .numpy()
            )
        scale = float(manifest.normalization["scale"])
        offset = float(manifest.normalization.get("offset", 0.0))
        for p, dec in zip(pairs, decoded):
            path = gen_dir / f"{p.pair_id}.gen{k}.vts1"
            rate = metrics.effective_fs(
                p.mean_speed, cfg.alignment.resample_len, cfg.alignment.d_near, cfg.alignment.d_far
            )
            formats.write_signal(path, dec * scale + offset, rate)
            written.append(path)
    log.info("generated %d signal files under %s", len(written), gen_dir)
    return written


def run_eval(cfg: PipelineConfig, out_dir, manifest: Optional[DatasetManifest] = None) -> Path:
    manifest = manifest or _load_manifest(out_dir)
    clf_model, clf_sidecar = checkpoints.load_classifier(checkpoint_dir(out_dir) / "classifier.pt")
    checkpoints.verify_lineage(clf_sidecar, {"config_hash": manifest.config_hash})
    report = metrics.build_report(manifest, generated_dir(out_dir), clf_model)
    report_path = Path(out_dir) / "report.json"
    report_path.write_text(canonical_json(report) + "\n", encoding="utf-8")
    return report_path


def run_all(cfg: PipelineConfig, out_dir) -> Path:
    """Full pipeline from config to report; the canonical reproducibility path."""
    manifest = run_synth(cfg, out_dir)
    run_train_vae(cfg, out_dir, manifest)
    run_train_diffusion(cfg, out_dir, manifest)
    run_train_classifier(cfg, out_dir, manifest)
    run_generate(cfg, out_dir, manifest)
    return run_eval(cfg, out_dir, manifest)
