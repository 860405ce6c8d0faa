"""Conditional latent diffusion: schedule, forward noising, reverse sampling,
and denoiser training.

The forward process mixes signal and noise as
``x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) z`` with a linear beta schedule;
``alpha_t = 1 - beta_t`` and ``abar_t`` is the running product (``abar_0 = 1``
by convention, so t = 0 is the identity). The reverse step is

    x_{t-1} = (x_t - (1 - alpha_t)/sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t)
              + sqrt(1 - alpha_t) * z

with z = 0 at the final step. Training minimizes the mean squared error
between predicted and injected noise at uniformly drawn steps. The diffusion
operates on VAE latent means divided by their global standard deviation
(recorded as latent_scale in the checkpoint).

Algebra-level entry points (forward_diffuse, reverse_step, sample,
training_loss) run on plain numpy arrays so they can be checked against
closed-form oracles without touching torch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from .errors import ConfigError, SamplingDiverged, ShapeError, StepError, TrainingDiverged
from .seeding import rng_for, torch_seed_for
from .unet import DenoiserConfig, NoiseUnet1d
from .vae import TactileVae
from .vision import extract_features, images_tensor

log = logging.getLogger(__name__)

BETA_START = 1e-4
BETA_END = 0.02
NOISE_STEPS = 1000


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step variance parameters; arrays are indexed t-1 for t in [1, T]."""

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    def _check_step(self, t: int, lo: int = 1):
        if not lo <= t <= self.T:
            raise StepError(f"step t={t} outside [{lo}, {self.T}]")

    def beta_at(self, t: int) -> float:
        self._check_step(t)
        return float(self.beta[t - 1])

    def alpha_at(self, t: int) -> float:
        self._check_step(t)
        return float(self.alpha[t - 1])

    def alpha_bar_at(self, t: int) -> float:
        self._check_step(t, lo=0)
        return 1.0 if t == 0 else float(self.alpha_bar[t - 1])

    def to_dict(self) -> dict:
        return {"T": self.T, "beta_start": float(self.beta[0]), "beta_end": float(self.beta[-1])}


def make_schedule(
    T: int = NOISE_STEPS, beta_start: float = BETA_START, beta_end: float = BETA_END
) -> NoiseSchedule:
    """Linear beta schedule inclusive of both endpoints."""
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise ConfigError(f"T must be a positive integer, got {T!r}")
    if not 0.0 < beta_start < beta_end < 1.0:
        raise ConfigError(
            f"need 0 < beta_start < beta_end < 1, got ({beta_start}, {beta_end})"
        )
    beta = np.linspace(beta_start, beta_end, T)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    return NoiseSchedule(T=int(T), beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def forward_diffuse(x0, t: int, noise, schedule: NoiseSchedule):
    """Noisy latent at step t per the closed-form marginal; t = 0 returns x0."""
    if np.shape(noise) != np.shape(x0):
        raise ShapeError(f"noise shape {np.shape(noise)} != x0 shape {np.shape(x0)}")
    abar = schedule.alpha_bar_at(t)
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * noise


def reverse_step(x_t, t: int, noise_pred, schedule: NoiseSchedule, z=None):
    """One denoising step x_t -> x_{t-1}; caller passes z = None (zero) at t = 1."""
    alpha = schedule.alpha_at(t)
    abar = schedule.alpha_bar_at(t)
    mean = (x_t - (1.0 - alpha) / np.sqrt(1.0 - abar) * noise_pred) / np.sqrt(alpha)
    if z is None:
        return mean
    return mean + np.sqrt(1.0 - alpha) * z


def sample_batch(
    denoiser: Callable,
    conds: Optional[np.ndarray],
    schedule: NoiseSchedule,
    shape: tuple,
    seeds: Sequence[int],
) -> np.ndarray:
    """Reverse-process draws for a batch of conditions.

    denoiser(x_batch, t, conds) -> predicted noise, same shape as x_batch.
    Each item consumes only its own seeded stream, so results do not depend on
    how items are batched together.
    """
    rngs = [rng_for(seed, "reverse-sample") for seed in seeds]
    x = np.stack([rng.standard_normal(shape) for rng in rngs])
    for t in range(schedule.T, 0, -1):
        eps = denoiser(x, t, conds)
        if np.shape(eps) != np.shape(x):
            raise ShapeError(f"denoiser returned shape {np.shape(eps)}, expected {np.shape(x)}")
        z = None if t == 1 else np.stack([rng.standard_normal(shape) for rng in rngs])
        x = reverse_step(x, t, eps, schedule, z)
        if not np.all(np.isfinite(x)):
            raise SamplingDiverged(t, f"non-finite latent at step {t}")
    return x


def sample(
    denoiser: Callable,
    cond: Optional[np.ndarray],
    schedule: NoiseSchedule,
    shape: tuple,
    seed: int,
) -> np.ndarray:
    """Single reverse-process draw; deterministic per seed."""
    conds = None if cond is None else np.asarray(cond)[np.newaxis]
    return sample_batch(denoiser, conds, schedule, shape, [seed])[0]


def training_loss(
    denoiser: Callable,
    cond: Optional[np.ndarray],
    x0: np.ndarray,
    schedule: NoiseSchedule,
    seed: int,
) -> float:
    """Single-draw noise-prediction objective: t ~ U[1, T], z ~ N(0, I),
    mean squared error between denoiser output and z."""
    rng = rng_for(seed, "train-draw")
    t = int(rng.integers(1, schedule.T + 1))
    z = rng.standard_normal(np.shape(x0))
    x_t = forward_diffuse(x0, t, z, schedule)
    conds = None if cond is None else np.asarray(cond)[np.newaxis]
    eps = denoiser(x_t[np.newaxis], t, conds)[0]
    return float(np.mean((eps - z) ** 2))


def torch_denoiser(model: NoiseUnet1d) -> Callable:
    """Wrap a trained torch model as the numpy callable sample_batch expects."""

    def call(x: np.ndarray, t: int, conds: Optional[np.ndarray]) -> np.ndarray:
        with torch.no_grad():
            xt = torch.from_numpy(np.ascontiguousarray(x)).float()
            c = torch.from_numpy(np.ascontiguousarray(conds)).float()
            return model(xt, t, c).double().numpy()

    return call


# ---------------------------------------------------------------------------
# Training


@dataclass
class DiffusionTrainConfig:
    steps: int = 4500
    batch_size: int = 32
    lr: float = 2e-4
    seed: int = 0
    log_every: int = 200
    finetune_backbone: bool = True


def encode_latents(vae: TactileVae, pairs: Sequence) -> np.ndarray:
    """Posterior means of all pair signals, (n, latent_channels, latent_len)."""
    from .vae import signals_tensor

    vae.eval()
    with torch.no_grad():
        latent = vae.encode(signals_tensor(pairs))
    return latent.mean.double().numpy()


def train_diffusion(
    pairs: Sequence,
    vae: TactileVae,
    backbone: torch.nn.Module,
    cfg: DenoiserConfig = DenoiserConfig(),
    schedule: Optional[NoiseSchedule] = None,
    opt: DiffusionTrainConfig = DiffusionTrainConfig(),
) -> tuple:
    """Train the noise predictor on VAE latents of a corpus split.

    The VAE stays frozen in eval mode; the vision backbone is fine-tuned
    jointly unless opt.finetune_backbone is False. Returns
    (denoiser, history, latent_scale).
    """
    if not pairs:
        raise ValueError("training split is empty")
    schedule = schedule or make_schedule()

    latents = encode_latents(vae, pairs)
    latent_scale = float(latents.std())
    if latent_scale <= 0 or not np.isfinite(latent_scale):
        raise TrainingDiverged(0, f"degenerate latent scale {latent_scale}")
    x0 = torch.from_numpy(latents / latent_scale).float()

    torch.manual_seed(torch_seed_for(opt.seed, "diffusion-init"))
    model = NoiseUnet1d(cfg)
    images = images_tensor(pairs, backbone)

    groups = [{"params": list(model.parameters()), "lr": opt.lr}]
    if opt.finetune_backbone:
        backbone.train()
        # gentler rate so fine-tuning refines rather than erases the warm-up
        groups.append({"params": list(backbone.parameters()), "lr": 0.5 * opt.lr})
    else:
        backbone.eval()
    optimizer = torch.optim.Adam(groups)
    lr_schedule = torch.optim.lr_scheduler.CosineAnnealingLR(
        optimizer, T_max=opt.steps, eta_min=0.05 * opt.lr
    )
    batch_rng = rng_for(opt.seed, "diffusion-batches")
    abar = torch.from_numpy(schedule.alpha_bar).float()

    n = x0.shape[0]
    history = {"loss": []}
    model.train()
    for step in range(opt.steps):
        idx = torch.from_numpy(batch_rng.choice(n, size=min(opt.batch_size, n), replace=False))
        batch = x0[idx]
        cond = backbone(images[idx]) if opt.finetune_backbone else _frozen_features(backbone, images[idx])
        t = torch.randint(1, schedule.T + 1, (batch.shape[0],))
        z = torch.randn_like(batch)
        a = abar[t - 1].view(-1, 1, 1)
        x_t = torch.sqrt(a) * batch + torch.sqrt(1.0 - a) * z
        pred = model(x_t, t, cond)
        loss = torch.mean((pred - z) ** 2)
        if not torch.isfinite(loss):
            raise TrainingDiverged(step, f"diffusion loss became {loss.item()} at step {step}")
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        lr_schedule.step()
        history["loss"].append(float(loss.item()))
        if opt.log_every and step % opt.log_every == 0:
            log.info("diffusion step %d: loss %.5f", step, history["loss"][-1])
    model.eval()
    backbone.eval()
    return model, history, latent_scale


def _frozen_features(backbone, images):
    with torch.no_grad():
        return backbone(images)


def generate_tactile(
    image,
    vae: TactileVae,
    backbone: torch.nn.Module,
    denoiser: NoiseUnet1d,
    schedule: NoiseSchedule,
    normalization: dict,
    latent_scale: float,
    seed: int,
):
    """Image -> features -> reverse diffusion -> VAE decode -> m/s^2 signal."""
    from .alignment import TactileSignal

    cond = extract_features(image, backbone)
    cfg = denoiser.cfg
    denoiser.eval()
    vae.eval()
    latent = sample(
        torch_denoiser(denoiser), cond, schedule, (cfg.in_channels, cfg.length), seed
    )
    with torch.no_grad():
        decoded = vae.decode(torch.from_numpy(latent * latent_scale).float()).double().numpy()
    scale = float(normalization["scale"])
    offset = float(normalization.get("offset", 0.0))
    return TactileSignal(values=decoded * scale + offset)
