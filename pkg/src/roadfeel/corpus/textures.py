"""Procedural road-surface imagery.

Not photorealistic: each class gets a distinct color palette, grain
correlation length, and structural pattern (speckle for gravel, running-bond
grid for brick, streaks for dirt) so that class identity is recoverable from
simple image statistics. Night renders apply a global gain drop plus sensor
noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.ndimage import gaussian_filter

from ..alignment import VisualFrame
from ..seeding import rng_for
from .profiles import LightCondition, RoadClass

DAY_GAIN = 1.0
NIGHT_GAIN = 0.35
NIGHT_NOISE = 0.03


@dataclass(frozen=True)
class TextureParams:
    base_rgb: tuple  # mean surface color, day-time, [0, 1]
    grain_sigma: float  # correlation length of luminance grain, px
    grain_contrast: float
    speckle_density: float = 0.0  # fraction of pixels turned into bright/dark stones
    brick: bool = False
    streaks: bool = False  # anisotropic smear along the travel direction


TEXTURE_PARAMS: Mapping[RoadClass, TextureParams] = {
    RoadClass.ASPHALT: TextureParams((0.28, 0.28, 0.31), grain_sigma=1.2, grain_contrast=0.04),
    RoadClass.CEMENT: TextureParams((0.62, 0.61, 0.58), grain_sigma=2.0, grain_contrast=0.05),
    RoadClass.MUDDY: TextureParams(
        (0.26, 0.19, 0.12), grain_sigma=3.5, grain_contrast=0.10, streaks=True
    ),
    RoadClass.DIRT: TextureParams((0.52, 0.40, 0.24), grain_sigma=1.5, grain_contrast=0.12),
    RoadClass.GRAVEL: TextureParams(
        (0.45, 0.43, 0.40), grain_sigma=0.8, grain_contrast=0.10, speckle_density=0.08
    ),
    RoadClass.BRICK: TextureParams(
        (0.55, 0.29, 0.21), grain_sigma=1.0, grain_contrast=0.05, brick=True
    ),
}


def _unit_grain(rng: np.random.Generator, shape: tuple, sigma: float) -> np.ndarray:
    noise = rng.standard_normal(shape)
    smooth = gaussian_filter(noise, sigma=sigma, mode="wrap")
    std = smooth.std()
    return smooth / std if std > 0 else smooth


def render_texture_image(
    road_class: RoadClass,
    light: LightCondition,
    seed: int,
    size: tuple = (64, 64),
) -> VisualFrame:
    """Deterministic H x W x 3 road texture in [0, 1] for (class, light, seed)."""
    h, w = size
    if h < 32 or w < 32:
        raise ValueError("image size must be at least 32 x 32")
    params = TEXTURE_PARAMS[road_class]
    rng = rng_for(seed, "texture", road_class.value)

    lum = params.grain_contrast * _unit_grain(rng, (h, w), params.grain_sigma)
    if params.streaks:
        lum += 0.06 * _unit_grain(rng, (h, w), sigma=(0.8, 6.0))

    img = np.empty((h, w, 3), dtype=np.float64)
    for c in range(3):
        img[:, :, c] = params.base_rgb[c] * (1.0 + lum)

    if params.speckle_density > 0:
        stones = rng.random((h, w)) < params.speckle_density
        shade = rng.uniform(-0.35, 0.45, size=(h, w))
        img += np.where(stones, shade, 0.0)[:, :, np.newaxis]

    if params.brick:
        rows = np.arange(h)
        cols = np.arange(w)
        course = h // 8  # brick course height, px
        span = w // 4  # brick length, px
        mortar_r = (rows % course) < max(1, course // 6)
        row_band = rows // course
        offset = (row_band % 2) * (span // 2)
        col_phase = (cols[np.newaxis, :] + offset[:, np.newaxis]) % span
        mortar_c = col_phase < max(1, span // 8)
        mortar = mortar_r[:, np.newaxis] | mortar_c
        img = np.where(mortar[:, :, np.newaxis], img * 0.55 + 0.08, img)

    if light is LightCondition.DAY:
        img = DAY_GAIN * img + 0.03
    else:
        img = NIGHT_GAIN * img + rng.normal(0.0, NIGHT_NOISE, size=(h, w, 3))

    return VisualFrame(t=0.0, image=np.clip(img, 0.0, 1.0).astype(np.float32), frame_id=0)
