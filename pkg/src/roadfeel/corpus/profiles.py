"""Procedural road elevation profiles.

Each road class is parameterized by a displacement power spectral density
G(n) = psd_magnitude * (n / n0)^(-psd_exponent) over spatial frequency n
(cycles/m, n0 = 0.1), in the style of standard road-roughness spectra, plus a
flat micro-texture band above 1 cycle/m and optional periodic joints (brick).

Profiles are synthesized as a sum of Fourier-bin cosines with deterministic
amplitudes sqrt(2 G(n) dn) and seeded uniform phases. Deterministic amplitudes
make the profile RMS an exact function of the class parameters (phases cancel
over the full record), so class roughness ordering holds for every seed, not
just on average.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from ..seeding import rng_for

REFERENCE_FREQ = 0.1  # cycles/m, anchor of the PSD magnitude
MICRO_TEXTURE_FREQ = 1.0  # cycles/m, lower edge of the flat micro-texture band
MICRO_TEXTURE_LEVEL = 2.0e-8  # m^3/cycle at micro_texture_scale = 1
LOWBAND_FREQ = 0.3  # cycles/m, upper edge of the long-undulation boost band


class RoadClass(enum.Enum):
    ASPHALT = "asphalt"
    CEMENT = "cement"
    MUDDY = "muddy"
    DIRT = "dirt"
    GRAVEL = "gravel"
    BRICK = "brick"

    @classmethod
    def from_label(cls, label: str) -> "RoadClass":
        return cls(label.lower())


class LightCondition(enum.Enum):
    DAY = "day"
    NIGHT = "night"

    @classmethod
    def from_label(cls, label: str) -> "LightCondition":
        return cls(label.lower())


# fixed label order used for class indices everywhere (splits, confusion rows)
CLASS_ORDER = (
    RoadClass.ASPHALT,
    RoadClass.CEMENT,
    RoadClass.MUDDY,
    RoadClass.DIRT,
    RoadClass.GRAVEL,
    RoadClass.BRICK,
)
CLASS_INDEX = {c: i for i, c in enumerate(CLASS_ORDER)}


@dataclass(frozen=True)
class RoadProfileParams:
    """Spectral shape of one road class.

    psd_magnitude: displacement PSD at the 0.1 cycles/m anchor, m^3/cycle.
    psd_exponent: log-log slope of the main band.
    micro_texture_scale: weight of the flat high-frequency band (>= 1 cycle/m).
    lowband_boost: extra gain below 0.3 cycles/m (long undulations, e.g. mud).
    joint_spacing / joint_depth: periodic surface joints (brick), metres.
    """

    psd_magnitude: float
    psd_exponent: float = 2.0
    micro_texture_scale: float = 1.0
    lowband_boost: float = 1.0
    joint_spacing: Optional[float] = None
    joint_depth: float = 0.0

    def __post_init__(self):
        if self.psd_magnitude <= 0:
            raise ValueError("psd_magnitude must be positive")


# Roughness ordering (by psd_magnitude): asphalt < cement < brick < dirt < muddy <= gravel.
# Micro texture separates classes of similar overall roughness by spectral shape.
DEFAULT_PROFILE_PARAMS: Mapping[RoadClass, RoadProfileParams] = {
    RoadClass.ASPHALT: RoadProfileParams(psd_magnitude=1.0e-5, micro_texture_scale=0.3),
    RoadClass.CEMENT: RoadProfileParams(psd_magnitude=2.0e-5, micro_texture_scale=0.8),
    RoadClass.BRICK: RoadProfileParams(
        psd_magnitude=4.0e-5, micro_texture_scale=1.5, joint_spacing=0.2, joint_depth=0.0035
    ),
    RoadClass.DIRT: RoadProfileParams(
        psd_magnitude=8.0e-5, micro_texture_scale=4.0, lowband_boost=1.5
    ),
    RoadClass.MUDDY: RoadProfileParams(
        psd_magnitude=1.4e-4, micro_texture_scale=0.5, lowband_boost=4.0
    ),
    RoadClass.GRAVEL: RoadProfileParams(psd_magnitude=2.2e-4, micro_texture_scale=10.0),
}


@dataclass
class RoadProfile:
    """Elevation samples [m] on a uniform spatial grid."""

    elevation: np.ndarray
    resolution_m: float
    road_class: Optional[RoadClass] = None

    @property
    def length_m(self) -> float:
        return self.elevation.size * self.resolution_m

    def positions(self) -> np.ndarray:
        return np.arange(self.elevation.size) * self.resolution_m


def displacement_psd(params: RoadProfileParams, freqs: np.ndarray) -> np.ndarray:
    """Target one-sided displacement PSD [m^3/cycle] at spatial freqs [cycles/m]."""
    freqs = np.asarray(freqs, dtype=np.float64)
    psd = np.zeros_like(freqs)
    pos = freqs > 0
    psd[pos] = params.psd_magnitude * (freqs[pos] / REFERENCE_FREQ) ** (-params.psd_exponent)
    if params.lowband_boost != 1.0:
        psd[pos & (freqs < LOWBAND_FREQ)] *= params.lowband_boost
    psd[pos & (freqs >= MICRO_TEXTURE_FREQ)] += params.micro_texture_scale * MICRO_TEXTURE_LEVEL
    return psd


def synthesize_road_profile(
    road_class: RoadClass,
    length_m: float,
    resolution_m: float,
    seed: int,
    params: Optional[RoadProfileParams] = None,
) -> RoadProfile:
    """Deterministic elevation profile for one road class.

    Fourier synthesis: amplitude sqrt(2 G(n_k) dn) at each positive bin, phase
    drawn uniformly from the seeded stream, assembled with a single inverse
    real FFT. Brick joints add a deterministic periodic dip train.
    """
    if length_m <= 0 or resolution_m <= 0:
        raise ValueError("length_m and resolution_m must be positive")
    if params is None:
        params = DEFAULT_PROFILE_PARAMS[road_class]
    n = int(round(length_m / resolution_m))
    if n < 8:
        raise ValueError("profile too short for spectral synthesis")
    freqs = np.fft.rfftfreq(n, d=resolution_m)
    dn = 1.0 / (n * resolution_m)
    amplitude = np.sqrt(2.0 * displacement_psd(params, freqs) * dn)

    rng = rng_for(seed, "road-profile", road_class.value)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=freqs.size)
    spectrum = (n / 2.0) * amplitude * np.exp(1j * phases)
    spectrum[0] = 0.0
    elevation = np.fft.irfft(spectrum, n=n)

    if params.joint_spacing:
        x = np.arange(n) * resolution_m
        phase = (x % params.joint_spacing) / params.joint_spacing
        width = 0.15  # joint width as a fraction of the spacing
        in_joint = phase < width
        # raised-cosine dip at each joint
        dip = 0.5 * (1.0 - np.cos(2.0 * np.pi * phase[in_joint] / width))
        elevation[in_joint] -= params.joint_depth * 0.5 * dip
    return RoadProfile(elevation=elevation, resolution_m=resolution_m, road_class=road_class)
