"""Encoder quantization, finite differences and the TV differentiator."""

import numpy as np
import pytest

from frictionid.dynamics import TimeSeries
from frictionid.presets import benchmark_signal
from frictionid.signals import (EncoderSpec, TVDiffConfig, _cumtrapz,
                                _cumtrapz_adjoint, finite_difference,
                                quantize_measurements, recover_derivatives,
                                tvdiff)


def _series(t, y):
    zeros = np.zeros((len(t), 2))
    y2 = np.column_stack([y, -y])
    return TimeSeries(t, y2, zeros, zeros, zeros)


def test_encoder_spec_validation():
    with pytest.raises(ValueError):
        EncoderSpec(resolution=0.0, velocity_word_resolution=1e-2)
    with pytest.raises(ValueError):
        EncoderSpec(resolution=1e-4, velocity_word_resolution=1e-2,
                    noise_std=-1.0)


def test_quantize_degenerate_resolution_passthrough():
    t = np.arange(100) * 0.02
    truth = _series(t, np.sin(t))
    spec = EncoderSpec(resolution=1e-15, velocity_word_resolution=1e-15,
                       noise_std=0.0)
    meas = quantize_measurements(truth, spec, seed=0)
    np.testing.assert_allclose(meas.y, truth.y, atol=1e-12)
    np.testing.assert_allclose(meas.ydot, truth.ydot, atol=1e-12)


def test_quantize_constant_position():
    t = np.arange(50) * 0.02
    truth = _series(t, np.full_like(t, 0.123))
    spec = EncoderSpec(resolution=1e-3, velocity_word_resolution=1e-2,
                       noise_std=0.0)
    meas = quantize_measurements(truth, spec, seed=1)
    assert np.unique(meas.y[:, 0]).size == 1
    assert np.all(meas.ydot == 0.0)


def test_quantize_deterministic_under_seed():
    t = np.arange(200) * 0.02
    truth = _series(t, np.sin(t))
    spec = EncoderSpec(resolution=1e-3, velocity_word_resolution=1e-2,
                       noise_std=2e-4)
    a = quantize_measurements(truth, spec, seed=11)
    b = quantize_measurements(truth, spec, seed=11)
    np.testing.assert_array_equal(a.y, b.y)
    c = quantize_measurements(truth, spec, seed=12)
    assert not np.array_equal(a.y, c.y)


def test_quantize_error_statistics():
    # error bounded by half a grid step plus the Gaussian tail; the 3-sigma
    # violation rate stays near its nominal probability across seeds
    t = np.arange(501) * 0.02
    truth = _series(t, np.sin(t))
    spec = EncoderSpec(resolution=1e-3, velocity_word_resolution=1e-2,
                       noise_std=2e-4)
    violations = 0
    total = 0
    worst = 0.0
    for seed in range(10):
        meas = quantize_measurements(truth, spec, seed)
        err = np.abs(meas.y - truth.y)
        violations += int((err > spec.resolution / 2
                           + 3 * spec.noise_std).sum())
        total += err.size
        worst = max(worst, float(err.max()))
    assert violations / total <= 2 * 0.0027
    assert worst <= spec.resolution / 2 + 6 * spec.noise_std


def test_finite_difference_linear_ramp_exact_everywhere():
    y = 3.7 * np.arange(50) * 0.1
    d = finite_difference(y, 0.1)
    np.testing.assert_allclose(d, 3.7, rtol=1e-12)


def test_finite_difference_sine_taylor_bound():
    dt = 1e-3
    t = np.arange(0, 2, dt)
    d = finite_difference(np.sin(t), dt)
    np.testing.assert_allclose(d, np.cos(t), atol=1e-6)


def test_finite_difference_needs_three_samples():
    with pytest.raises(ValueError):
        finite_difference(np.array([1.0, 2.0]), 0.1)


def test_integration_operator_adjoint_consistency():
    # <A u, w> == <u, A' w> for the trapezoid pair used inside tvdiff
    rng = np.random.default_rng(0)
    for n in (2, 3, 17, 101):
        u = rng.normal(size=n)
        w = rng.normal(size=n)
        dt = 0.037
        lhs = _cumtrapz(u, dt) @ w
        rhs = u @ _cumtrapz_adjoint(w, dt)
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_tvdiff_config_validation():
    with pytest.raises(ValueError):
        TVDiffConfig(alpha=0.0, iterations=10, dt=0.01)
    with pytest.raises(ValueError):
        TVDiffConfig(alpha=1.0, iterations=0, dt=0.01)


def test_tvdiff_linear_ramp_gives_constant_derivative():
    dt = 0.01
    t = np.arange(0, 3, dt)
    y = 1.4 * t + 0.2
    res = tvdiff(y, TVDiffConfig(alpha=1e-3, iterations=50, dt=dt))
    np.testing.assert_allclose(res.derivative, 1.4, atol=1e-6)
    tv = np.abs(np.diff(res.derivative)).sum()
    assert tv < 1e-5


def test_tvdiff_step_derivative_recovered_sharply():
    rng = np.random.default_rng(3)
    dt = 0.01
    t = np.arange(0, 2, dt)
    deriv_true = np.where(t < 1.0, 0.3, 1.7)
    y = np.concatenate([[0.0],
                        np.cumsum(0.5 * dt * (deriv_true[1:] + deriv_true[:-1]))])
    y += rng.normal(0, 1e-3, size=t.shape)
    res = tvdiff(y, TVDiffConfig(alpha=1e-2, iterations=80, dt=dt))
    u = res.derivative
    step = 1.7 - 0.3
    in_transition = np.flatnonzero((u > 0.3 + 0.1 * step)
                                   & (u < 1.7 - 0.1 * step))
    width = in_transition.max() - in_transition.min() + 1 if len(in_transition) else 0
    assert width <= 2
    np.testing.assert_allclose(u[:80], 0.3, atol=0.05)
    np.testing.assert_allclose(u[120:], 1.7, atol=0.05)


def test_tvdiff_translation_invariance():
    rng = np.random.default_rng(4)
    dt = 0.02
    t = np.arange(0, 4, dt)
    y = np.sin(t) + rng.normal(0, 1e-3, size=t.shape)
    cfg = TVDiffConfig(alpha=1e-3, iterations=30, dt=dt)
    base = tvdiff(y, cfg).derivative
    shifted = tvdiff(y + 57.3, cfg).derivative
    np.testing.assert_allclose(shifted, base, atol=1e-8)


def test_tvdiff_scale_equivariance():
    # scaling the signal by c maps the minimizer to c times the original
    # when the penalty scales by c and the smoothing constant by c^2
    rng = np.random.default_rng(5)
    dt = 0.02
    t = np.arange(0, 4, dt)
    y = np.sin(t) + rng.normal(0, 1e-3, size=t.shape)
    c = 8.0
    alpha = 1e-3
    base = tvdiff(y, TVDiffConfig(alpha=alpha, iterations=30, dt=dt,
                                  epsilon=1e-6))
    scaled = tvdiff(c * y, TVDiffConfig(alpha=alpha * c, iterations=30, dt=dt,
                                        epsilon=1e-6 * c**2))
    np.testing.assert_allclose(scaled.derivative, c * base.derivative,
                               atol=1e-6)


def test_tvdiff_objective_monotone_descent():
    rng = np.random.default_rng(6)
    dt = 0.01
    t = np.arange(0, 3, dt)
    y = np.sin(2 * t) + rng.normal(0, 5e-3, size=t.shape)
    for alpha in (1e-4, 1e-3, 1e-2):
        res = tvdiff(y, TVDiffConfig(alpha=alpha, iterations=60, dt=dt))
        diffs = np.diff(res.objective_history)
        assert np.all(diffs <= 1e-12)


def test_tvdiff_beats_finite_differences_on_benchmark():
    t, noisy, _, ydot_true, f_high = benchmark_signal()
    dt = t[1] - t[0]
    fd = finite_difference(noisy, dt)
    rmse_fd = np.sqrt(np.mean((fd - ydot_true) ** 2))
    res = tvdiff(noisy, TVDiffConfig(alpha=1e-2, iterations=60, dt=dt))
    rmse_tv = np.sqrt(np.mean((res.derivative - ydot_true) ** 2))
    assert rmse_tv < rmse_fd / 3.0
    # mild low-pass behavior: the top tone keeps most of its amplitude
    w = 2 * np.pi * f_high
    basis = np.column_stack([np.cos(w * t), np.sin(w * t)])
    amp_est = np.linalg.norm(np.linalg.lstsq(basis, res.derivative,
                                             rcond=None)[0])
    amp_true = np.linalg.norm(np.linalg.lstsq(basis, ydot_true, rcond=None)[0])
    assert amp_est >= 0.8 * amp_true


def test_recover_derivatives_two_channels():
    dt = 0.02
    t = np.arange(0, 6, dt)
    y = np.column_stack([np.sin(t), 0.5 * np.cos(t)])
    cfg = TVDiffConfig(alpha=1e-5, iterations=40, dt=dt)
    ydot, yddot, results = recover_derivatives(y, dt, cfg, cfg)
    assert len(results) == 4
    interior = slice(20, -20)
    np.testing.assert_allclose(ydot[interior, 0], np.cos(t)[interior],
                               atol=5e-3)
    np.testing.assert_allclose(yddot[interior, 1], -0.5 * np.cos(t)[interior],
                               atol=5e-2)
