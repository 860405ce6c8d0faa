"""Road-image feature extraction for conditioning the denoiser.

Two interchangeable backbones produce the 256-d conditioning vector: a
pretrained residual-18 network with its final layer swapped for a linear
projection (needs downloadable weights), and a small strided CNN trained from
scratch that keeps the pipeline hermetic. Global average pooling before the
projection makes the output dimension independent of input resolution.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn

from .errors import BackboneUnavailable, ConfigError, DecodeError, TrainingDiverged
from .seeding import rng_for, torch_seed_for

log = logging.getLogger(__name__)

FEATURE_DIM = 256

# per-channel standardization constants
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
PLAIN_MEAN = (0.5, 0.5, 0.5)
PLAIN_STD = (0.5, 0.5, 0.5)


class SmallConvBackbone(nn.Module):
    """Four strided conv blocks, global average pool, linear projection."""

    kind = "small-conv"
    input_size: Optional[int] = None  # accepts any resolution
    mean, std = PLAIN_MEAN, PLAIN_STD

    def __init__(self, out_dim: int = FEATURE_DIM, widths: Sequence[int] = (32, 64, 128, 256)):
        super().__init__()
        blocks = []
        in_ch = 3
        for w in widths:
            blocks += [
                nn.Conv2d(in_ch, w, kernel_size=3, stride=2, padding=1),
                nn.BatchNorm2d(w),
                nn.ReLU(),
            ]
            in_ch = w
        self.blocks = nn.Sequential(*blocks)
        self.proj = nn.Linear(in_ch, out_dim)
        self.out_dim = out_dim

    def forward(self, x):
        h = self.blocks(x)
        return self.proj(h.mean(dim=(2, 3)))


class Residual18Backbone(nn.Module):
    """Pretrained residual-18 trunk with the classification layer replaced by
    a linear projection to out_dim."""

    kind = "residual-18-pretrained"
    input_size = 224
    mean, std = IMAGENET_MEAN, IMAGENET_STD

    def __init__(self, out_dim: int = FEATURE_DIM, pretrained: bool = True):
        super().__init__()
        try:
            from torchvision.models import ResNet18_Weights, resnet18

            net = resnet18(weights=ResNet18_Weights.DEFAULT if pretrained else None)
        except Exception as exc:  # download/import failure
            raise BackboneUnavailable(
                "pretrained residual-18 weights unavailable "
                f"({exc}); use kind='small-conv' for offline runs"
            ) from exc
        net.fc = nn.Linear(net.fc.in_features, out_dim)
        self.net = net
        self.out_dim = out_dim

    def forward(self, x):
        return self.net(x)


def load_backbone(
    kind: str = "small-conv",
    out_dim: int = FEATURE_DIM,
    seed: int = 0,
    pretrained: bool = True,
) -> nn.Module:
    """Build a feature extractor by kind; raises ConfigError on unknown kinds.

    pretrained=False skips the weight download (used when restoring from a
    checkpoint that will overwrite every parameter anyway).
    """
    torch.manual_seed(torch_seed_for(seed, "backbone-init", kind))
    if kind == "small-conv":
        return SmallConvBackbone(out_dim)
    if kind == "residual-18-pretrained":
        return Residual18Backbone(out_dim, pretrained=pretrained)
    raise ConfigError(f"unknown backbone kind {kind!r}; expected 'small-conv' or 'residual-18-pretrained'")


def images_tensor(images: Sequence, backbone: nn.Module) -> torch.Tensor:
    """Stack images into a standardized (n, 3, H, W) batch for the backbone.

    Accepts H x W x 3 float arrays in [0, 1] (or frames carrying one).
    """
    arrays = []
    for image in images:
        obj = getattr(image, "frame", image)  # aligned pairs carry their frame
        arr = np.asarray(getattr(obj, "image", obj), dtype=np.float32)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise DecodeError(f"expected an H x W x 3 image, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise DecodeError("image contains non-finite values")
        arrays.append(arr)
    batch = torch.from_numpy(np.stack(arrays)).permute(0, 3, 1, 2)
    if backbone.input_size and batch.shape[-1] != backbone.input_size:
        batch = torch.nn.functional.interpolate(
            batch, size=(backbone.input_size, backbone.input_size),
            mode="bilinear", align_corners=False,
        )
    mean = torch.tensor(backbone.mean).view(1, 3, 1, 1)
    std = torch.tensor(backbone.std).view(1, 3, 1, 1)
    return (batch - mean) / std


def extract_features(image, backbone: nn.Module) -> np.ndarray:
    """Deterministic feature vector for one image (backbone in eval mode)."""
    backbone.eval()
    with torch.no_grad():
        out = backbone(images_tensor([image], backbone))
    vec = out[0].numpy().astype(np.float64)
    if vec.shape != (backbone.out_dim,) or not np.isfinite(vec).all():
        raise DecodeError(f"backbone produced invalid features of shape {vec.shape}")
    return vec


def extract_features_batch(images: Sequence, backbone: nn.Module) -> np.ndarray:
    backbone.eval()
    with torch.no_grad():
        out = backbone(images_tensor(images, backbone))
    return out.numpy().astype(np.float64)


def pretrain_backbone(
    pairs: Sequence,
    backbone: nn.Module,
    class_index,
    steps: int = 300,
    batch_size: int = 32,
    lr: float = 1e-3,
    seed: int = 0,
) -> dict:
    """Supervised warm-up: fit backbone features to road-class labels via a
    throwaway linear head. Mutates the backbone in place; returns history."""
    from .corpus.profiles import RoadClass

    torch.manual_seed(torch_seed_for(seed, "backbone-warmup"))
    images = images_tensor(pairs, backbone)
    labels = torch.tensor([class_index[RoadClass.from_label(p.road_class)] for p in pairs])
    head = nn.Linear(backbone.out_dim, len(class_index))
    optimizer = torch.optim.Adam(list(backbone.parameters()) + list(head.parameters()), lr=lr)
    batch_rng = rng_for(seed, "backbone-warmup-batches")
    history = {"loss": []}
    backbone.train()
    n = images.shape[0]
    for step in range(steps):
        idx = torch.from_numpy(batch_rng.choice(n, size=min(batch_size, n), replace=False))
        logits = head(backbone(images[idx]))
        loss = nn.functional.cross_entropy(logits, labels[idx])
        if not torch.isfinite(loss):
            raise TrainingDiverged(step, f"warm-up loss became {loss.item()} at step {step}")
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        history["loss"].append(float(loss.item()))
    backbone.eval()
    return history
