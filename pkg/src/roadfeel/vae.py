"""1D variational autoencoder for tactile windows.

Encoder: four ConvLayers (conv1d + batch norm + ReLU + strided 1x1-conv
residual), a self-attention block after the second layer, and twin conv heads
for mean/logvar. Decoder mirrors it with transposed convolutions and a final
tanh, so reconstructions stay inside (-1, 1). The 1024-sample input maps to an
8 x 64 latent where the denoiser operates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from .errors import ShapeError, TrainingDiverged
from .seeding import rng_for, torch_seed_for

log = logging.getLogger(__name__)

LOGVAR_MIN = -30.0
LOGVAR_MAX = 20.0


@dataclass(frozen=True)
class VaeConfig:
    input_len: int = 1024
    input_channels: int = 1
    conv_channels: Tuple[int, ...] = (32, 64, 128, 128)
    strides: Tuple[int, ...] = (2, 2, 2, 2)
    latent_channels: int = 8
    latent_len: int = 64
    kl_weight: float = 1e-4
    attention_heads: int = 4

    def __post_init__(self):
        if len(self.conv_channels) != len(self.strides):
            raise ValueError("conv_channels and strides must have equal length")
        total = math.prod(self.strides)
        if self.input_len % total != 0:
            raise ValueError(f"input_len {self.input_len} not divisible by stride product {total}")
        if self.latent_len != self.input_len // total:
            raise ValueError(
                f"latent_len must be input_len / {total} = {self.input_len // total}"
            )


@dataclass
class LatentSequence:
    """Gaussian posterior over the latent: (latent_channels, latent_len) maps."""

    mean: torch.Tensor
    logvar: torch.Tensor


class ConvLayer1d(nn.Module):
    """conv1d + batch norm + ReLU, with a strided 1x1-conv residual path."""

    def __init__(self, in_channels: int, out_channels: int, stride: int):
        super().__init__()
        self.conv = nn.Conv1d(in_channels, out_channels, kernel_size=5, stride=stride, padding=2)
        self.norm = nn.BatchNorm1d(out_channels)
        self.act = nn.ReLU()
        self.skip = nn.Conv1d(in_channels, out_channels, kernel_size=1, stride=stride)

    def forward(self, x):
        return self.act(self.norm(self.conv(x))) + self.skip(x)


class DeconvLayer1d(nn.Module):
    """ConvLayer1d mirror: transposed convs on both the main and skip paths."""

    def __init__(self, in_channels: int, out_channels: int, stride: int):
        super().__init__()
        self.conv = nn.ConvTranspose1d(
            in_channels, out_channels, kernel_size=2 * stride, stride=stride, padding=stride // 2
        )
        self.norm = nn.BatchNorm1d(out_channels)
        self.act = nn.ReLU()
        self.skip = nn.ConvTranspose1d(in_channels, out_channels, kernel_size=stride, stride=stride)

    def forward(self, x):
        return self.act(self.norm(self.conv(x))) + self.skip(x)


class SelfAttentionBlock1d(nn.Module):
    """Length-wise self-attention over a (batch, channels, length) sequence.

    Composition: transpose to length-major, layer norm, multi-head attention
    with a residual add of the pre-norm input, feed-forward with residual add,
    transpose back. Output shape equals input shape.
    """

    def __init__(self, channels: int, heads: int = 4, ffn_mult: int = 4):
        super().__init__()
        self.channels = channels
        self.norm = nn.LayerNorm(channels)
        self.mha = nn.MultiheadAttention(channels, heads, batch_first=True)
        self.ffn = nn.Sequential(
            nn.Linear(channels, ffn_mult * channels),
            nn.ReLU(),
            nn.Linear(ffn_mult * channels, channels),
        )

    def forward(self, x):
        if x.dim() != 3 or x.shape[1] != self.channels:
            raise ShapeError(
                f"expected (batch, {self.channels}, length), got {tuple(x.shape)}"
            )
        xt = x.transpose(1, 2)
        x_ln = self.norm(xt)
        x_attn = self.mha(x_ln, x_ln, x_ln, need_weights=False)[0] + xt
        x_ffn = self.ffn(x_attn) + x_attn
        return x_ffn.transpose(1, 2)


class TactileVae(nn.Module):
    def __init__(self, cfg: VaeConfig = VaeConfig()):
        super().__init__()
        self.cfg = cfg
        chans = (cfg.input_channels,) + cfg.conv_channels

        layers: List[nn.Module] = []
        for i, stride in enumerate(cfg.strides):
            layers.append(ConvLayer1d(chans[i], chans[i + 1], stride))
            if i == 1:  # global context after the second ConvLayer
                layers.append(SelfAttentionBlock1d(chans[i + 1], cfg.attention_heads))
        self.encoder = nn.Sequential(*layers)
        self.head_mean = nn.Conv1d(chans[-1], cfg.latent_channels, kernel_size=3, padding=1)
        self.head_logvar = nn.Conv1d(chans[-1], cfg.latent_channels, kernel_size=3, padding=1)

        self.latent_proj = nn.Conv1d(cfg.latent_channels, chans[-1], kernel_size=3, padding=1)
        rev_chans = chans[::-1]
        rev_strides = cfg.strides[::-1]
        delayers: List[nn.Module] = []
        for i, stride in enumerate(rev_strides[:-1]):
            delayers.append(DeconvLayer1d(rev_chans[i], rev_chans[i + 1], stride))
            if i == len(rev_strides) - 3:  # mirror of the encoder attention slot
                delayers.append(SelfAttentionBlock1d(rev_chans[i + 1], cfg.attention_heads))
        self.decoder = nn.Sequential(*delayers)
        self.final = nn.ConvTranspose1d(
            rev_chans[-2], cfg.input_channels, kernel_size=2 * rev_strides[-1],
            stride=rev_strides[-1], padding=rev_strides[-1] // 2,
        )

    def encode(self, x: torch.Tensor) -> LatentSequence:
        x, squeeze = _ensure_batched(x, (self.cfg.input_channels, self.cfg.input_len), "encode")
        h = self.encoder(x)
        mean = self.head_mean(h)
        logvar = torch.clamp(self.head_logvar(h), LOGVAR_MIN, LOGVAR_MAX)
        if squeeze:
            mean, logvar = mean[0], logvar[0]
        return LatentSequence(mean=mean, logvar=logvar)

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        z, squeeze = _ensure_batched(
            z, (self.cfg.latent_channels, self.cfg.latent_len), "decode"
        )
        out = torch.tanh(self.final(self.decoder(self.latent_proj(z))))
        return out[0] if squeeze else out

    def forward(self, x: torch.Tensor, seed: Optional[int] = None) -> tuple:
        latent = self.encode(x)
        z = reparameterize(latent, seed)
        return self.decode(z), latent


def _ensure_batched(x: torch.Tensor, expected: tuple, op: str):
    squeeze = x.dim() == len(expected)
    if squeeze:
        x = x.unsqueeze(0)
    if x.dim() != len(expected) + 1 or tuple(x.shape[1:]) != expected:
        raise ShapeError(f"{op}: expected trailing shape {expected}, got {tuple(x.shape)}")
    return x, squeeze


def reparameterize(latent: LatentSequence, seed: Optional[int] = None) -> torch.Tensor:
    """mean + exp(logvar/2) * eps with eps ~ N(0, I); seeded when seed given."""
    std = torch.exp(0.5 * torch.clamp(latent.logvar, LOGVAR_MIN, LOGVAR_MAX))
    if seed is None:
        eps = torch.randn_like(std)
    else:
        gen = torch.Generator().manual_seed(torch_seed_for(seed, "reparameterize"))
        eps = torch.randn(std.shape, generator=gen, dtype=std.dtype)
    return latent.mean + std * eps


def elbo_terms(x: torch.Tensor, recon: torch.Tensor, latent: LatentSequence) -> tuple:
    """(reconstruction MSE, KL to the unit Gaussian), both as per-element means."""
    recon_loss = torch.mean((recon - x) ** 2)
    kl = torch.mean(
        -0.5 * (1.0 + latent.logvar - latent.mean**2 - torch.exp(latent.logvar))
    )
    return recon_loss, kl


@dataclass
class VaeTrainConfig:
    steps: int = 1000
    batch_size: int = 32
    lr: float = 2e-3
    seed: int = 0
    log_every: int = 200


def signals_tensor(pairs: Sequence) -> torch.Tensor:
    """Stack pair signals into a (n, channels, length) float32 tensor."""
    return torch.from_numpy(
        np.stack([p.signal.values for p in pairs]).astype(np.float32)
    )


def train_vae(
    pairs: Sequence,
    cfg: VaeConfig = VaeConfig(),
    opt: VaeTrainConfig = VaeTrainConfig(),
    model: Optional[TactileVae] = None,
) -> tuple:
    """Fit the VAE on a training split; returns (model, per-step loss history).

    History keys: loss, recon, kl — one entry per optimization step.
    """
    if not pairs:
        raise ValueError("training split is empty")
    torch.manual_seed(torch_seed_for(opt.seed, "vae-init"))
    if model is None:
        model = TactileVae(cfg)
    model.train()
    data = signals_tensor(pairs)
    n = data.shape[0]
    optimizer = torch.optim.Adam(model.parameters(), lr=opt.lr)
    batch_rng = rng_for(opt.seed, "vae-batches")
    history = {"loss": [], "recon": [], "kl": []}

    for step in range(opt.steps):
        idx = batch_rng.choice(n, size=min(opt.batch_size, n), replace=False)
        batch = data[torch.from_numpy(idx)]
        recon, latent = model(batch, seed=torch_seed_for(opt.seed, "vae-eps", step))
        recon_loss, kl = elbo_terms(batch, recon, latent)
        loss = recon_loss + cfg.kl_weight * kl
        if not torch.isfinite(loss):
            raise TrainingDiverged(step, f"VAE loss became {loss.item()} at step {step}")
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        history["loss"].append(float(loss.item()))
        history["recon"].append(float(recon_loss.item()))
        history["kl"].append(float(kl.item()))
        if opt.log_every and step % opt.log_every == 0:
            log.info(
                "vae step %d: loss %.5f (recon %.5f, kl %.3f)",
                step, history["loss"][-1], history["recon"][-1], history["kl"][-1],
            )
    model.eval()
    return model, history


def reconstruction_rmse(model: TactileVae, pairs: Sequence) -> float:
    """RMSE of decode(encode-mean) over a split, in normalized units."""
    model.eval()
    with torch.no_grad():
        x = signals_tensor(pairs)
        recon = model.decode(model.encode(x).mean)
        return float(torch.sqrt(torch.mean((recon - x) ** 2)).item())
