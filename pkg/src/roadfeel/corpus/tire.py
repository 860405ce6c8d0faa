"""Tire response simulation: road elevation -> accelerometer trace.

The elevation profile is first smoothed over the tire contact patch (the
patch envelops wavelengths shorter than its own length, a spatial effect
independent of speed), then swept at the vehicle speed to give a base
displacement excitation in time, shaped by a fixed second-order resonant
band-pass (a minimal quarter-car-style wheel/suspension response) and topped
with seeded sensor noise. The filter is documented by its analog prototype so
the corpus is reproducible bit for bit:

    H(s) = GAIN * (w0/Q) s / (s^2 + (w0/Q) s + w0^2)

    resonance f0 = 12 Hz  (w0 = 2 pi f0)
    quality    Q = 1.8
    GAIN       = 2000 s^-2   (displacement [m] -> acceleration [m/s^2])

discretized per sample rate with the bilinear transform. The patch filter is
a Gaussian kernel of PATCH_SIGMA_M standard deviation on the profile grid.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy import signal as sps
from scipy.ndimage import gaussian_filter1d

from ..alignment import TactileStream
from ..seeding import rng_for
from .profiles import RoadProfile

RESONANCE_HZ = 12.0
QUALITY = 1.8
GAIN = 2000.0  # s^-2
SENSOR_NOISE_RMS = 0.02  # m/s^2
PATCH_SIGMA_M = 0.06  # contact patch ~3 sigma long


def tire_filter_coefficients(fs: float) -> tuple:
    """Digital (b, a) for the documented band-pass at sample rate fs."""
    w0 = 2.0 * np.pi * RESONANCE_HZ
    b_analog = [GAIN * w0 / QUALITY, 0.0]
    a_analog = [1.0, w0 / QUALITY, w0 * w0]
    return sps.bilinear(b_analog, a_analog, fs=fs)


def simulate_tire_response(
    profile: RoadProfile,
    speed: float,
    fs: float,
    seed: int = 0,
    noise_rms: float = SENSOR_NOISE_RMS,
    duration: Optional[float] = None,
) -> TactileStream:
    """Acceleration trace of a tire traversing `profile` at constant speed.

    Covers the whole profile unless `duration` is given. Noise is drawn from
    the seeded stream; noise_rms=0 gives the pure linear response.
    """
    if speed <= 0:
        raise ValueError("speed must be positive")
    if fs <= 0:
        raise ValueError("fs must be positive")
    if duration is None:
        duration = profile.length_m / speed
    n_t = int(np.floor(duration * fs)) + 1
    t = np.arange(n_t) / fs
    x = speed * t
    enveloped = gaussian_filter1d(
        profile.elevation, PATCH_SIGMA_M / profile.resolution_m, mode="wrap"
    )
    base = np.interp(x, profile.positions(), enveloped)

    b, a = tire_filter_coefficients(fs)
    response = sps.lfilter(b, a, base)
    if noise_rms > 0:
        response = response + rng_for(seed, "tire-noise").normal(0.0, noise_rms, size=n_t)
    return TactileStream(t0=0.0, fs=fs, data=response[np.newaxis, :])
