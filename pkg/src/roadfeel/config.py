"""Single source of truth for a pipeline run.

PipelineConfig nests every stage's parameters; its SHA-256 hash is echoed
into the corpus manifest and all checkpoint sidecars, so downstream commands
can refuse artifacts from a different configuration. JSON round-trips exactly
(tuples come back as tuples).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Tuple, Union

from .alignment import AlignmentConfig
from .classifier import ClassifierConfig, ClassifierTrainConfig
from .diffusion import BETA_END, BETA_START, NOISE_STEPS, DiffusionTrainConfig, make_schedule
from .errors import ConfigError
from .unet import DenoiserConfig
from .vae import VaeConfig, VaeTrainConfig


@dataclass(frozen=True)
class ScheduleConfig:
    T: int = NOISE_STEPS
    beta_start: float = BETA_START
    beta_end: float = BETA_END

    def build(self):
        return make_schedule(self.T, self.beta_start, self.beta_end)


@dataclass
class PipelineConfig:
    seed: int = 0
    counts: Union[str, int] = "default"
    speeds: Tuple[float, float] = (5.0, 15.0)
    backbone_kind: str = "small-conv"
    backbone_warmup_steps: int = 300
    generations_per_pair: int = 1
    alignment: AlignmentConfig = AlignmentConfig()
    vae: VaeConfig = VaeConfig()
    vae_train: VaeTrainConfig = field(default_factory=VaeTrainConfig)
    denoiser: DenoiserConfig = DenoiserConfig()
    diffusion_train: DiffusionTrainConfig = field(default_factory=DiffusionTrainConfig)
    classifier: ClassifierConfig = ClassifierConfig()
    classifier_train: ClassifierTrainConfig = field(default_factory=ClassifierTrainConfig)
    schedule: ScheduleConfig = ScheduleConfig()

    def __post_init__(self):
        # stage seeds always derive from the master seed
        self.vae_train = replace(self.vae_train, seed=self.seed)
        self.diffusion_train = replace(self.diffusion_train, seed=self.seed)
        self.classifier_train = replace(self.classifier_train, seed=self.seed)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        doc = dict(doc)
        try:
            nested = {
                "alignment": (AlignmentConfig, ("channel_select",)),
                "vae": (VaeConfig, ("conv_channels", "strides")),
                "vae_train": (VaeTrainConfig, ()),
                "denoiser": (DenoiserConfig, ("channels",)),
                "diffusion_train": (DiffusionTrainConfig, ()),
                "classifier": (ClassifierConfig, ("widths",)),
                "classifier_train": (ClassifierTrainConfig, ()),
                "schedule": (ScheduleConfig, ()),
            }
            for key, (cls_, tuple_fields) in nested.items():
                if key in doc and isinstance(doc[key], dict):
                    sub = dict(doc[key])
                    for tf in tuple_fields:
                        if tf in sub:
                            sub[tf] = tuple(sub[tf])
                    doc[key] = cls_(**sub)
            if "speeds" in doc:
                doc["speeds"] = tuple(doc["speeds"])
            return cls(**doc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid pipeline config: {exc}") from exc

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(canonical_json(self.to_dict()) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(doc)


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1)


def config_hash(cfg: PipelineConfig) -> str:
    """SHA-256 over the canonical JSON form; chains artifacts of one run."""
    return hashlib.sha256(canonical_json(cfg.to_dict()).encode("utf-8")).hexdigest()
