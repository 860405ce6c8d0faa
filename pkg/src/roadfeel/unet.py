"""1D U-Net noise predictor for latent diffusion.

Takes a noisy latent (channels x length), the diffusion step t, and a 256-d
image feature vector; predicts the noise that was mixed in. The step index
enters through a sinusoidal embedding, the condition is linearly projected
and added to it, and the combined embedding modulates every residual block
through a per-channel scale and shift. Skip connections tie together matching
resolutions of the down and up paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import torch
from torch import nn

from .errors import ShapeError


@dataclass(frozen=True)
class DenoiserConfig:
    in_channels: int = 8
    length: int = 64
    levels: int = 3
    channels: Tuple[int, ...] = (64, 128, 256)
    time_embed_dim: int = 256
    cond_dim: int = 256
    blocks_per_level: int = 2

    def __post_init__(self):
        if len(self.channels) != self.levels:
            raise ValueError("channels must list one width per level")
        if self.length % (2 ** (self.levels - 1)) != 0:
            raise ValueError("length must be divisible by 2^(levels-1)")


def sinusoidal_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Standard sin/cos position encoding of step indices; t shape (batch,)."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float32) / (half - 1))
    args = t.float()[:, None] * freqs[None, :]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=-1)


class ResBlock1d(nn.Module):
    """GroupNorm/SiLU/conv x2; the step-plus-condition embedding modulates the
    second norm with a per-channel scale and shift (FiLM); 1x1 shortcut when
    widths change."""

    def __init__(self, in_channels: int, out_channels: int, emb_dim: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(8, in_channels)
        self.conv1 = nn.Conv1d(in_channels, out_channels, kernel_size=3, padding=1)
        self.emb_proj = nn.Linear(emb_dim, 2 * out_channels)
        self.norm2 = nn.GroupNorm(8, out_channels)
        self.conv2 = nn.Conv1d(out_channels, out_channels, kernel_size=3, padding=1)
        self.act = nn.SiLU()
        if in_channels != out_channels:
            self.skip = nn.Conv1d(in_channels, out_channels, kernel_size=1)
        else:
            self.skip = nn.Identity()

    def forward(self, x, emb):
        h = self.conv1(self.act(self.norm1(x)))
        scale, shift = self.emb_proj(self.act(emb))[:, :, None].chunk(2, dim=1)
        h = self.norm2(h) * (1 + scale) + shift
        h = self.conv2(self.act(h))
        return h + self.skip(x)


class NoiseUnet1d(nn.Module):
    def __init__(self, cfg: DenoiserConfig = DenoiserConfig()):
        super().__init__()
        self.cfg = cfg
        ch = cfg.channels
        emb_dim = cfg.time_embed_dim

        self.time_mlp = nn.Sequential(
            nn.Linear(emb_dim, emb_dim), nn.SiLU(), nn.Linear(emb_dim, emb_dim)
        )
        self.cond_proj = nn.Linear(cfg.cond_dim, emb_dim)

        self.stem = nn.Conv1d(cfg.in_channels, ch[0], kernel_size=3, padding=1)
        self.down_blocks = nn.ModuleList()
        self.downsamples = nn.ModuleList()
        for i in range(cfg.levels):
            self.down_blocks.append(
                nn.ModuleList(
                    [ResBlock1d(ch[i], ch[i], emb_dim) for _ in range(cfg.blocks_per_level)]
                )
            )
            if i < cfg.levels - 1:
                self.downsamples.append(
                    nn.Conv1d(ch[i], ch[i + 1], kernel_size=3, stride=2, padding=1)
                )

        self.mid1 = ResBlock1d(ch[-1], ch[-1], emb_dim)
        self.mid2 = ResBlock1d(ch[-1], ch[-1], emb_dim)

        self.upsamples = nn.ModuleList()
        self.up_blocks = nn.ModuleList()
        for i in range(cfg.levels - 2, -1, -1):
            self.upsamples.append(
                nn.ConvTranspose1d(ch[i + 1], ch[i], kernel_size=4, stride=2, padding=1)
            )
            blocks = [ResBlock1d(2 * ch[i], ch[i], emb_dim)]
            blocks += [ResBlock1d(ch[i], ch[i], emb_dim) for _ in range(cfg.blocks_per_level - 1)]
            self.up_blocks.append(nn.ModuleList(blocks))

        self.out_norm = nn.GroupNorm(8, ch[0])
        self.out_conv = nn.Conv1d(ch[0], cfg.in_channels, kernel_size=3, padding=1)
        self.act = nn.SiLU()

    def forward(self, x: torch.Tensor, t, cond: torch.Tensor) -> torch.Tensor:
        squeeze = x.dim() == 2
        if squeeze:
            x = x.unsqueeze(0)
        if x.shape[1] != self.cfg.in_channels or x.shape[2] != self.cfg.length:
            raise ShapeError(
                f"expected latent (batch, {self.cfg.in_channels}, {self.cfg.length}), "
                f"got {tuple(x.shape)}"
            )
        if not torch.is_tensor(t):
            t = torch.full((x.shape[0],), int(t))
        if cond.dim() == 1:
            cond = cond.unsqueeze(0)
        if cond.shape != (x.shape[0], self.cfg.cond_dim):
            raise ShapeError(
                f"expected condition ({x.shape[0]}, {self.cfg.cond_dim}), got {tuple(cond.shape)}"
            )
        emb = self.time_mlp(sinusoidal_embedding(t, self.cfg.time_embed_dim))
        emb = emb + self.cond_proj(cond.float())

        h = self.stem(x)
        skips = []
        for i, blocks in enumerate(self.down_blocks):
            for block in blocks:
                h = block(h, emb)
            skips.append(h)
            if i < self.cfg.levels - 1:
                h = self.downsamples[i](h)

        h = self.mid2(self.mid1(h, emb), emb)

        for i, blocks in enumerate(self.up_blocks):
            h = self.upsamples[i](h)
            h = torch.cat([h, skips[self.cfg.levels - 2 - i]], dim=1)
            for block in blocks:
                h = block(h, emb)

        out = self.out_conv(self.act(self.out_norm(h)))
        return out[0] if squeeze else out
