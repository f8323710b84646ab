import numpy as np
import pytest
from scipy import stats

from qmlbench.garch import (
    GarchParams,
    garch_filter,
    garch_fit,
    garch_forecast,
    garch_nll,
    simulate_garch,
)


def test_param_invariants():
    GarchParams(1e-6, 0.1, 0.8)
    with pytest.raises(ValueError):
        GarchParams(0.0, 0.1, 0.8)  # omega must be positive
    with pytest.raises(ValueError):
        GarchParams(1e-6, -0.1, 0.8)
    with pytest.raises(ValueError):
        GarchParams(1e-6, 0.3, 0.7)  # alpha + beta on the boundary
    with pytest.raises(ValueError):
        GarchParams(1e-6, 0.2, 1.0 - 0.2)  # beta = 1 - alpha rejected


def test_forecast_substitution_anchor():
    params = GarchParams(1e-6, 0.1, 0.8, mu=0.0)
    assert garch_forecast(params, 0.01, 1e-4) == pytest.approx(9.1e-5, rel=1e-12)


def test_forecast_reduces_to_omega():
    params = GarchParams(2.5e-4, 0.0, 0.0)
    assert garch_forecast(params, 0.13, 1e-4) == params.omega
    assert garch_forecast(params, -0.5, 1e-2) == params.omega


def test_forecast_needs_positive_variance():
    with pytest.raises(ValueError):
        garch_forecast(GarchParams(1e-6, 0.1, 0.8), 0.0, 0.0)


def test_filter_matches_loop_oracle():
    # independent oracle: explicit sequential recursion
    rng = np.random.default_rng(0)
    r = rng.normal(0, 0.01, 300)
    params = GarchParams(2e-6, 0.07, 0.9, mu=0.0002)
    sig = garch_filter(params, r)
    want = np.empty_like(sig)
    want[0] = np.var(r)
    for t in range(1, len(r)):
        want[t] = params.omega + params.alpha * (r[t - 1] - params.mu) ** 2 + params.beta * want[t - 1]
    assert np.max(np.abs(sig - want)) < 1e-15


def test_nll_constant_variance_closed_form():
    # alpha = beta = 0: sigma2_t = omega for t >= 1, sample variance at t = 0
    rng = np.random.default_rng(1)
    r = rng.normal(0.0, 0.015, 500)
    omega = 2.2e-4
    params = GarchParams(omega, 0.0, 0.0, mu=0.0)
    want = -stats.norm.logpdf(r[0], 0.0, np.sqrt(np.var(r)))
    want -= stats.norm.logpdf(r[1:], 0.0, np.sqrt(omega)).sum()
    assert garch_nll(params, r) == pytest.approx(float(want), rel=1e-12)


def test_nll_improves_toward_sample_variance():
    rng = np.random.default_rng(2)
    r = rng.normal(0, 0.01, 400)
    var = float(np.var(r))
    far = garch_nll(GarchParams(25 * var, 0.0, 0.0), r)
    near = garch_nll(GarchParams(var, 0.0, 0.0), r)
    assert near < far


def test_nll_true_beats_perturbed_on_simulations():
    # simulation oracle: true parameters should dominate a +50% perturbation
    true = GarchParams(1e-6, 0.1, 0.8)
    perturbed = GarchParams(1.5e-6, 0.15, 0.8)  # alpha/omega off by +50%
    wins = 0
    for seed in range(100):
        r = simulate_garch(true, 900, seed=seed)
        wins += garch_nll(true, r) <= garch_nll(perturbed, r)
    assert wins >= 95


def test_fit_recovers_simulated_parameters_quick():
    # brief version of the acceptance criterion (3 seeds, loose bounds)
    true = GarchParams(1e-6, 0.1, 0.8)
    alphas, betas = [], []
    for seed in range(3):
        r = simulate_garch(true, 5000, seed=seed)
        fit = garch_fit(r)
        alphas.append(fit.alpha)
        betas.append(fit.beta)
    assert abs(np.median(alphas) - true.alpha) < 0.05
    assert abs(np.median(betas) - true.beta) < 0.05


def test_iid_gaussian_alpha_near_zero():
    alphas = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        fit = garch_fit(rng.normal(0, 0.01, 3000))
        alphas.append(fit.alpha)
    assert np.median(alphas) <= 0.05


def test_zero_returns_error():
    with pytest.raises(ValueError):
        garch_fit(np.zeros(500))


def test_unconditional_variance_matches_long_run_mean():
    true = GarchParams(1e-6, 0.1, 0.8)
    r = simulate_garch(true, 100_000, seed=11)
    assert np.mean(r**2) == pytest.approx(true.unconditional_variance, rel=0.05)


def test_forecast_positivity_property():
    rng = np.random.default_rng(3)
    for _ in range(50):
        alpha = rng.uniform(0, 0.4)
        beta = rng.uniform(0, 0.95 - alpha)
        params = GarchParams(rng.uniform(1e-7, 1e-4), alpha, beta, mu=rng.normal(0, 1e-3))
        assert garch_forecast(params, rng.normal(0, 0.05), rng.uniform(1e-8, 1e-2)) > 0


def test_short_sample_warns():
    rng = np.random.default_rng(4)
    with pytest.warns(UserWarning):
        garch_fit(rng.normal(0, 0.01, 50))
