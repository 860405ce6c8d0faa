"""Checkpoint IO: torch state dicts plus a mandatory JSON sidecar.

Every checkpoint `X.pt` has a sidecar `X.pt.json` carrying {config, seed,
final_losses, schema_version, config_hash}. The config echo lets loaders
rebuild the right architecture; the config hash chains artifacts of one
pipeline run together so mixed lineages are rejected instead of silently
evaluated.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch

from .classifier import ClassifierConfig, SignalClassifier
from .errors import CheckpointMismatch
from .unet import DenoiserConfig, NoiseUnet1d
from .vae import TactileVae, VaeConfig
from .vision import load_backbone

SCHEMA_VERSION = 1


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def _final_losses(history: dict) -> dict:
    return {key: (vals[-1] if vals else None) for key, vals in history.items()}


def write_bundle(path, state: dict, sidecar: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(state, path)
    doc = {"schema_version": SCHEMA_VERSION, **sidecar}
    sidecar_path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_bundle(path) -> tuple:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing checkpoint: {path}")
    side = sidecar_path(path)
    if not side.exists():
        raise CheckpointMismatch(f"checkpoint {path} has no sidecar {side}")
    sidecar = json.loads(side.read_text(encoding="utf-8"))
    if sidecar.get("schema_version") != SCHEMA_VERSION:
        raise CheckpointMismatch(
            f"{side}: unsupported schema_version {sidecar.get('schema_version')!r}"
        )
    state = torch.load(path, map_location="cpu", weights_only=True)
    return state, sidecar


def verify_lineage(*sidecars: dict) -> str:
    """All artifacts must carry the same config_hash; returns it."""
    hashes = {s.get("config_hash", "") for s in sidecars}
    if len(hashes) != 1:
        raise CheckpointMismatch(f"mixed artifact lineages: config hashes {sorted(hashes)}")
    return hashes.pop()


# ---------------------------------------------------------------------------
# Stage-specific savers/loaders


def save_vae(path, model: TactileVae, history: dict, seed: int, config_hash: str = "") -> Path:
    from dataclasses import asdict

    return write_bundle(
        path,
        {"model": model.state_dict()},
        {
            "kind": "vae",
            "config": asdict(model.cfg),
            "seed": int(seed),
            "final_losses": _final_losses(history),
            "config_hash": config_hash,
        },
    )


def load_vae(path) -> tuple:
    state, sidecar = read_bundle(path)
    if sidecar.get("kind") != "vae":
        raise CheckpointMismatch(f"{path}: expected a vae checkpoint, got {sidecar.get('kind')!r}")
    cfg_d = dict(sidecar["config"])
    for key in ("conv_channels", "strides"):
        cfg_d[key] = tuple(cfg_d[key])
    model = TactileVae(VaeConfig(**cfg_d))
    model.load_state_dict(state["model"])
    model.eval()
    return model, sidecar


def save_diffusion(
    path,
    denoiser: NoiseUnet1d,
    backbone: torch.nn.Module,
    backbone_kind: str,
    schedule_dict: dict,
    latent_scale: float,
    vae_config: dict,
    history: dict,
    seed: int,
    config_hash: str = "",
) -> Path:
    from dataclasses import asdict

    return write_bundle(
        path,
        {"denoiser": denoiser.state_dict(), "backbone": backbone.state_dict()},
        {
            "kind": "diffusion",
            "config": asdict(denoiser.cfg),
            "backbone_kind": backbone_kind,
            "schedule": dict(schedule_dict),
            "latent_scale": float(latent_scale),
            "vae_config": dict(vae_config),
            "seed": int(seed),
            "final_losses": _final_losses(history),
            "config_hash": config_hash,
        },
    )


def load_diffusion(path) -> tuple:
    """Returns (denoiser, backbone, sidecar); backbone weights come from the
    checkpoint, so no pretrained download happens here."""
    state, sidecar = read_bundle(path)
    if sidecar.get("kind") != "diffusion":
        raise CheckpointMismatch(
            f"{path}: expected a diffusion checkpoint, got {sidecar.get('kind')!r}"
        )
    cfg_d = dict(sidecar["config"])
    cfg_d["channels"] = tuple(cfg_d["channels"])
    denoiser = NoiseUnet1d(DenoiserConfig(**cfg_d))
    denoiser.load_state_dict(state["denoiser"])
    denoiser.eval()
    backbone = load_backbone(sidecar["backbone_kind"], cfg_d["cond_dim"], pretrained=False)
    backbone.load_state_dict(state["backbone"])
    backbone.eval()
    return denoiser, backbone, sidecar


def save_classifier(
    path, model: SignalClassifier, history: dict, seed: int, config_hash: str = ""
) -> Path:
    from dataclasses import asdict

    return write_bundle(
        path,
        {"model": model.state_dict()},
        {
            "kind": "classifier",
            "config": asdict(model.cfg),
            "seed": int(seed),
            "final_losses": _final_losses(history),
            "config_hash": config_hash,
        },
    )


def load_classifier(path) -> tuple:
    state, sidecar = read_bundle(path)
    if sidecar.get("kind") != "classifier":
        raise CheckpointMismatch(
            f"{path}: expected a classifier checkpoint, got {sidecar.get('kind')!r}"
        )
    cfg_d = dict(sidecar["config"])
    cfg_d["widths"] = tuple(cfg_d["widths"])
    model = SignalClassifier(ClassifierConfig(**cfg_d))
    model.load_state_dict(state["model"])
    model.eval()
    return model, sidecar


def check_schedule_match(sidecar: dict, schedule_dict: dict) -> None:
    echoed = sidecar.get("schedule", {})
    if {k: echoed.get(k) for k in ("T", "beta_start", "beta_end")} != {
        k: schedule_dict.get(k) for k in ("T", "beta_start", "beta_end")
    }:
        raise CheckpointMismatch(
            f"schedule mismatch: checkpoint trained with {echoed}, requested {schedule_dict}"
        )


def check_vae_match(diff_sidecar: dict, vae_sidecar: dict) -> None:
    # normalize through JSON so tuple/list differences don't matter
    a = json.loads(json.dumps(diff_sidecar.get("vae_config"), sort_keys=True))
    b = json.loads(json.dumps(vae_sidecar.get("config"), sort_keys=True))
    if a != b:
        raise CheckpointMismatch(
            "diffusion checkpoint was trained against a different VAE configuration"
        )
