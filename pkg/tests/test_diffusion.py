"""Noise schedule algebra, forward/reverse process, sampling, training loss."""

import numpy as np
import pytest
import torch

from roadfeel.diffusion import (
    DiffusionTrainConfig,
    forward_diffuse,
    make_schedule,
    reverse_step,
    sample,
    sample_batch,
    torch_denoiser,
    train_diffusion,
    training_loss,
)
from roadfeel.errors import ConfigError, SamplingDiverged, ShapeError, StepError
from roadfeel.unet import DenoiserConfig, NoiseUnet1d


# ---------------------------------------------------------------------------
# schedule


def test_schedule_endpoints():
    s = make_schedule(1000, 1e-4, 0.02)
    assert s.beta_at(1) == pytest.approx(1e-4, rel=1e-12)
    assert s.beta_at(1000) == pytest.approx(0.02, rel=1e-12)
    assert s.alpha_at(1) == pytest.approx(0.9999, rel=1e-12)
    assert s.alpha_at(1000) == pytest.approx(0.98, rel=1e-12)


def test_alpha_bar_direct_product_oracle():
    s = make_schedule(1000, 1e-4, 0.02)
    betas = np.linspace(1e-4, 0.02, 1000)
    prod = 1.0
    for b in betas:  # independent scalar loop, no cumprod
        prod *= 1.0 - b
    assert abs(s.alpha_bar_at(1000) - prod) < 1e-6
    assert s.alpha_bar_at(1000) == pytest.approx(4.0e-5, abs=1e-6)


def test_alpha_bar_strictly_decreasing_with_unit_start():
    s = make_schedule(50, 1e-4, 0.02)
    assert s.alpha_bar_at(0) == 1.0
    bars = np.array([s.alpha_bar_at(t) for t in range(51)])
    assert (np.diff(bars) < 0).all()


def test_schedule_single_step_edge():
    s = make_schedule(1, 0.4999, 0.5)
    assert s.T == 1
    assert s.alpha_bar_at(1) == pytest.approx(0.5001, rel=1e-12)


def test_schedule_rejects_degenerate_betas():
    with pytest.raises(ConfigError):
        make_schedule(1, 0.5, 0.5)
    with pytest.raises(ConfigError):
        make_schedule(1000, 0.02, 1e-4)
    with pytest.raises(ConfigError):
        make_schedule(0, 1e-4, 0.02)
    with pytest.raises(ConfigError):
        make_schedule(10, 0.0, 0.02)


def test_schedule_step_bounds():
    s = make_schedule(10, 1e-4, 0.02)
    with pytest.raises(StepError):
        s.beta_at(0)
    with pytest.raises(StepError):
        s.alpha_at(11)


# ---------------------------------------------------------------------------
# forward process


def test_forward_diffuse_matches_closed_form():
    s = make_schedule(1000, 1e-4, 0.02)
    rng = np.random.default_rng(0)
    x0 = rng.normal(size=(8, 64))
    z = rng.normal(size=(8, 64))
    for t in (1, 137, 1000):
        abar = s.alpha_bar_at(t)
        expected = np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * z
        np.testing.assert_allclose(forward_diffuse(x0, t, z, s), expected, rtol=0, atol=0)


def test_forward_diffuse_t0_identity():
    s = make_schedule(10, 1e-4, 0.02)
    x0 = np.ones((2, 4))
    np.testing.assert_array_equal(forward_diffuse(x0, 0, np.zeros_like(x0), s), x0)


def test_forward_diffuse_shape_mismatch():
    s = make_schedule(10, 1e-4, 0.02)
    with pytest.raises(ShapeError):
        forward_diffuse(np.zeros((2, 4)), 1, np.zeros((2, 5)), s)


def test_noise_inversion_machine_precision():
    # solving the forward map for z recovers it at machine epsilon
    s = make_schedule(1000, 1e-4, 0.02)
    rng = np.random.default_rng(1)
    x0 = rng.normal(size=(8, 64))
    z = rng.normal(size=(8, 64))
    for t in (1, 500, 1000):
        abar = s.alpha_bar_at(t)
        x_t = forward_diffuse(x0, t, z, s)
        z_back = (x_t - np.sqrt(abar) * x0) / np.sqrt(1.0 - abar)
        assert np.max(np.abs(z_back - z)) < 1e-12


def test_marginal_consistency_stepwise_vs_single_shot():
    """Composing single steps x_t = sqrt(a_t) x_{t-1} + sqrt(1-a_t) z_t matches
    the one-shot marginal's mean and variance within Monte-Carlo 3-sigma."""
    s = make_schedule(50, 1e-3, 0.05)
    n, k, x0 = 10_000, 30, 1.5
    rng = np.random.default_rng(42)
    x = np.full(n, x0)
    for t in range(1, k + 1):
        a = s.alpha_at(t)
        x = np.sqrt(a) * x + np.sqrt(1.0 - a) * rng.standard_normal(n)
    abar = s.alpha_bar_at(k)
    mean_exp, var_exp = np.sqrt(abar) * x0, 1.0 - abar
    mean_se = np.sqrt(var_exp / n)
    var_se = var_exp * np.sqrt(2.0 / (n - 1))
    assert abs(x.mean() - mean_exp) < 3 * mean_se
    assert abs(x.var(ddof=1) - var_exp) < 3 * var_se


# ---------------------------------------------------------------------------
# reverse process


def test_reverse_step_literal_formula():
    s = make_schedule(100, 1e-4, 0.02)
    rng = np.random.default_rng(2)
    x_t = rng.normal(size=(3, 5))
    eps = rng.normal(size=(3, 5))
    z = rng.normal(size=(3, 5))
    t = 40
    a, abar = s.alpha_at(t), s.alpha_bar_at(t)
    expected = (x_t - (1 - a) / np.sqrt(1 - abar) * eps) / np.sqrt(a) + np.sqrt(1 - a) * z
    np.testing.assert_allclose(reverse_step(x_t, t, eps, s, z), expected, atol=0)
    # z = None drops the noise term (the t = 1 convention)
    expected_mean = (x_t - (1 - a) / np.sqrt(1 - abar) * eps) / np.sqrt(a)
    np.testing.assert_allclose(reverse_step(x_t, t, eps, s, None), expected_mean, atol=0)


def test_oracle_denoiser_recovers_target():
    """A denoiser hard-wired to point at a known x0* turns every reverse step
    into the exact posterior mean; the full loop lands on x0*."""
    s = make_schedule(1000, 1e-4, 0.02)
    rng = np.random.default_rng(3)
    target = rng.normal(size=(8, 64))

    def oracle(x, t, conds):
        abar = s.alpha_bar_at(t)
        return (x - np.sqrt(abar) * target) / np.sqrt(1.0 - abar)

    out = sample(oracle, None, s, (8, 64), seed=0)
    assert np.max(np.abs(out - target)) < 1e-4


def test_sample_deterministic_and_seed_sensitive():
    s = make_schedule(20, 1e-4, 0.02)

    def null_denoiser(x, t, conds):
        return np.zeros_like(x)

    a = sample(null_denoiser, None, s, (2, 8), seed=5)
    b = sample(null_denoiser, None, s, (2, 8), seed=5)
    c = sample(null_denoiser, None, s, (2, 8), seed=6)
    np.testing.assert_array_equal(a, b)
    assert np.max(np.abs(a - c)) > 0


def test_sample_batch_independent_of_batching():
    s = make_schedule(15, 1e-4, 0.02)

    def denoiser(x, t, conds):
        return 0.1 * x

    both = sample_batch(denoiser, None, s, (2, 8), seeds=[11, 12])
    alone = np.stack([sample(denoiser, None, s, (2, 8), seed=k) for k in (11, 12)])
    np.testing.assert_array_equal(both, alone)


def test_sample_rejects_bad_denoiser_shape():
    s = make_schedule(5, 1e-4, 0.02)
    with pytest.raises(ShapeError):
        sample(lambda x, t, c: x[..., :4], None, s, (2, 8), seed=0)


def test_sample_flags_divergence():
    s = make_schedule(5, 1e-4, 0.02)
    with pytest.raises(SamplingDiverged):
        sample(lambda x, t, c: np.full_like(x, np.nan), None, s, (2, 8), seed=0)


# ---------------------------------------------------------------------------
# training loss


def test_training_loss_zero_for_exact_oracle():
    s = make_schedule(100, 1e-4, 0.02)
    rng = np.random.default_rng(4)
    x0 = rng.normal(size=(8, 64))

    def oracle(x_t, t, conds):
        abar = s.alpha_bar_at(t)
        return (x_t - np.sqrt(abar) * x0[np.newaxis]) / np.sqrt(1.0 - abar)

    assert training_loss(oracle, None, x0, s, seed=0) < 1e-10


def test_training_loss_zero_denoiser_near_unit():
    """Predicting zero against unit noise: mean loss over 1e4 seeded draws
    converges to E[z^2] = 1."""
    s = make_schedule(1000, 1e-4, 0.02)
    x0 = np.zeros((8, 64))

    def zero(x_t, t, conds):
        return np.zeros_like(x_t)

    losses = [training_loss(zero, None, x0, s, seed=k) for k in range(10_000)]
    assert np.mean(losses) == pytest.approx(1.0, abs=0.01)


def test_training_loss_deterministic():
    s = make_schedule(50, 1e-4, 0.02)
    rng = np.random.default_rng(5)
    x0 = rng.normal(size=(4, 16))

    def denoiser(x_t, t, conds):
        return 0.5 * x_t

    assert training_loss(denoiser, None, x0, s, seed=9) == training_loss(
        denoiser, None, x0, s, seed=9
    )


# ---------------------------------------------------------------------------
# torch denoiser plumbing


def test_torch_denoiser_wraps_model():
    torch.manual_seed(0)
    cfg = DenoiserConfig(in_channels=4, length=16, levels=2, channels=(16, 32))
    model = NoiseUnet1d(cfg).eval()
    call = torch_denoiser(model)
    x = np.random.default_rng(0).normal(size=(3, 4, 16))
    conds = np.zeros((3, 256))
    out = call(x, 5, conds)
    assert out.shape == x.shape
    assert np.isfinite(out).all()


def test_unet_rejects_wrong_latent_shape():
    model = NoiseUnet1d(DenoiserConfig())
    with pytest.raises(ShapeError):
        model(torch.zeros(1, 8, 32), 1, torch.zeros(1, 256))
    with pytest.raises(ShapeError):
        model(torch.zeros(1, 8, 64), 1, torch.zeros(1, 128))
