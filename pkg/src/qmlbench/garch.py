"""GARCH(1,1) baseline: Gaussian quasi-MLE fit and one-step variance forecasts.

The conditional variance recursion is

    sigma2_{t+1} = omega + alpha * (r_t - mu)^2 + beta * sigma2_t

seeded at the sample variance. Estimation runs Nelder-Mead on a logistic
reparameterization that keeps omega > 0, alpha, beta >= 0 and
alpha + beta < 1 by construction, with a fixed deterministic multi-start.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

_LOG_2PI = np.log(2.0 * np.pi)
_MAX_PERSISTENCE = 1.0 - 1e-7


@dataclass(frozen=True)
class GarchParams:
    omega: float
    alpha: float
    beta: float
    mu: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.omega) and self.omega > 0):
            raise ValueError("omega must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.alpha + self.beta >= 1:
            raise ValueError("stationarity requires alpha + beta < 1")

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.alpha - self.beta)


def garch_filter(params: GarchParams, returns, sigma2_0: float | None = None) -> np.ndarray:
    """Conditional variance path sigma2_t for t = 0..n-1.

    sigma2_0 defaults to the sample variance of the input returns.
    """
    r = np.asarray(returns, dtype=float)
    if len(r) < 2:
        raise ValueError("need at least 2 returns")
    if sigma2_0 is None:
        sigma2_0 = float(np.var(r))
    if sigma2_0 <= 0:
        raise ValueError("degenerate input: zero sample variance")
    shocks = (r - params.mu) ** 2
    # sigma2_t = drive_t + beta * sigma2_{t-1} is an AR(1) filter
    drive = params.omega + params.alpha * shocks[:-1]
    tail, _ = lfilter([1.0], [1.0, -params.beta], drive, zi=np.array([params.beta * sigma2_0]))
    return np.concatenate([[sigma2_0], tail])


def garch_nll(params: GarchParams, returns) -> float:
    """Gaussian negative log-likelihood under the variance recursion."""
    r = np.asarray(returns, dtype=float)
    if len(r) < 10:
        raise ValueError("need at least 10 observations")
    sigma2 = garch_filter(params, r)
    resid2 = (r - params.mu) ** 2
    return float(0.5 * np.sum(_LOG_2PI + np.log(sigma2) + resid2 / sigma2))


def _unpack(theta: np.ndarray) -> GarchParams:
    a, b, c, m = theta
    omega = np.exp(np.clip(a, -60.0, 60.0))
    persistence = min(1.0 / (1.0 + np.exp(-np.clip(b, -60.0, 60.0))), _MAX_PERSISTENCE)
    split = 1.0 / (1.0 + np.exp(-np.clip(c, -60.0, 60.0)))
    return GarchParams(omega=omega, alpha=persistence * split, beta=persistence * (1.0 - split), mu=m)


def _logit(x: float) -> float:
    return float(np.log(x / (1.0 - x)))


# start grid in (persistence, shock share) space; omega targets the sample variance
_STARTS = ((0.88, 0.10), (0.50, 0.50), (0.97, 0.05), (0.20, 0.50))


def garch_fit(returns) -> GarchParams:
    """Constrained quasi-MLE via Nelder-Mead with deterministic multi-start."""
    r = np.asarray(returns, dtype=float)
    if len(r) < 10:
        raise ValueError("need at least 10 observations")
    if len(r) < 100:
        warnings.warn("fewer than 100 observations: GARCH estimates will be noisy")
    var = float(np.var(r))
    if var <= 0:
        raise ValueError("degenerate input: returns have zero variance")

    def objective(theta):
        try:
            return garch_nll(_unpack(theta), r)
        except (ValueError, FloatingPointError):
            return np.inf

    best = None
    for persistence, split in _STARTS:
        theta0 = np.array(
            [np.log(var * (1.0 - persistence)), _logit(persistence), _logit(split), float(np.mean(r))]
        )
        res = minimize(objective, theta0, method="Nelder-Mead",
                       options={"maxiter": 2000, "xatol": 1e-6, "fatol": 1e-8})
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise RuntimeError("GARCH fit failed to converge from every start")
    return _unpack(best.x)


def garch_forecast(params: GarchParams, r_t: float, sigma2_t: float) -> float:
    """One-step-ahead conditional variance."""
    if sigma2_t <= 0:
        raise ValueError("sigma2_t must be positive")
    return params.omega + params.alpha * (r_t - params.mu) ** 2 + params.beta * sigma2_t


def simulate_garch(params: GarchParams, n: int, seed: int, burn: int = 200) -> np.ndarray:
    """Forward-simulate a return path with Gaussian innovations.

    Plain sequential generator, independent of the filter/likelihood code;
    the burn-in removes dependence on the unconditional start.
    """
    rng = np.random.default_rng(seed)
    total = n + burn
    z = rng.standard_normal(total)
    sigma2 = params.unconditional_variance
    out = np.empty(total)
    for t in range(total):
        r = params.mu + np.sqrt(sigma2) * z[t]
        out[t] = r
        sigma2 = params.omega + params.alpha * (r - params.mu) ** 2 + params.beta * sigma2
    return out[burn:]
