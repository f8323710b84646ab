"""Classification, trading, forecasting, and regime-validation statistics.

Annualization uses 252 trading periods per year throughout. Metrics whose
denominator vanishes (AUC on a single class, Sharpe at zero volatility,
precision with no positive calls) are reported as None rather than raised.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

PERIODS_PER_YEAR = 252


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class ClassificationReport:
    accuracy: float
    precision: float | None
    recall: float | None
    auc: float | None


def auc_score(probs: np.ndarray, labels: np.ndarray) -> float | None:
    """ROC-AUC via the rank statistic with average ranks on ties.

    None when only one class is present (undefined).
    """
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=float)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = stats.rankdata(probs)
    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def classification_metrics(probs, labels, threshold: float = 0.5) -> ClassificationReport:
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if probs.shape != labels.shape:
        raise ValueError("probs and labels length mismatch")
    if not np.all(np.isin(labels, (0.0, 1.0))):
        raise ValueError("labels must be binary 0/1")
    pred = (probs > threshold).astype(float)
    tp = float(np.sum((pred == 1) & (labels == 1)))
    fp = float(np.sum((pred == 1) & (labels == 0)))
    fn = float(np.sum((pred == 0) & (labels == 1)))
    accuracy = float(np.mean(pred == labels))
    precision = tp / (tp + fp) if (tp + fp) > 0 else None
    recall = tp / (tp + fn) if (tp + fn) > 0 else None
    return ClassificationReport(accuracy, precision, recall, auc_score(probs, labels))


# ---------------------------------------------------------------------------
# trading


@dataclass(frozen=True)
class TradingReport:
    arc: float
    asd: float
    sharpe: float | None
    sortino: float | None
    max_drawdown: float


def sharpe_ratio(arc: float, asd: float, r_f: float = 0.0) -> float | None:
    """Annualized excess return per unit of annualized volatility."""
    if asd == 0:
        return None
    return (arc - r_f) / asd


def max_drawdown(equity: np.ndarray) -> float:
    """Worst peak-to-trough relative loss; 0 for a monotone rise, else < 0."""
    equity = np.asarray(equity, dtype=float)
    peaks = np.maximum.accumulate(equity)
    return float(np.min(equity / peaks - 1.0))


def trading_metrics(equity, periods_per_year: int = PERIODS_PER_YEAR, r_f: float = 0.0) -> TradingReport:
    """ARC/ASD/Sharpe/Sortino/MaxDD from an equity path.

    ARC compounds the total return to an annual rate; ASD annualizes the
    per-period return volatility; Sortino divides by the annualized
    downside deviation (negative returns only, full-count denominator).
    """
    equity = np.asarray(equity, dtype=float)
    if len(equity) < 2:
        raise ValueError("need at least 2 equity points")
    if np.any(equity <= 0):
        raise ValueError("equity must stay positive")
    r = equity[1:] / equity[:-1] - 1.0
    total = equity[-1] / equity[0]
    arc = float(total ** (periods_per_year / len(r)) - 1.0)
    asd = float(np.std(r, ddof=1) * np.sqrt(periods_per_year)) if len(r) > 1 else 0.0
    downside = float(np.sqrt(np.mean(np.minimum(r, 0.0) ** 2)) * np.sqrt(periods_per_year))
    sortino = (arc - r_f) / downside if downside > 0 else None
    return TradingReport(
        arc=arc,
        asd=asd,
        sharpe=sharpe_ratio(arc, asd, r_f),
        sortino=sortino,
        max_drawdown=max_drawdown(equity),
    )


# ---------------------------------------------------------------------------
# volatility forecasting


def qlike(rv_true, rv_pred) -> float:
    """Mean of log(pred) + true/pred; minimized when pred equals truth.

    Under-forecasts are punished more than over-forecasts; predictions
    must be strictly positive.
    """
    rv_true = np.asarray(rv_true, dtype=float)
    rv_pred = np.asarray(rv_pred, dtype=float)
    if rv_true.shape != rv_pred.shape:
        raise ValueError("length mismatch")
    if np.any(rv_pred <= 0):
        raise ValueError("forecasts must be strictly positive")
    if np.any(rv_true < 0):
        raise ValueError("realized variance must be non-negative")
    return float(np.mean(qlike_series(rv_true, rv_pred)))


def qlike_series(rv_true, rv_pred) -> np.ndarray:
    """Per-day QLIKE terms (used as the DM loss series)."""
    rv_true = np.asarray(rv_true, dtype=float)
    rv_pred = np.asarray(rv_pred, dtype=float)
    return np.log(rv_pred) + rv_true / rv_pred


def regression_metrics(y_true, y_pred) -> tuple[float, float, float, float]:
    """(mse, mae, r2, dir_acc); dir_acc is the share of days whose
    day-over-day change matches in sign."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or len(y_true) < 2:
        raise ValueError("need equal-length arrays of at least 2 points")
    err = y_pred - y_true
    mse = float(np.mean(err**2))
    mae = float(np.mean(np.abs(err)))
    sst = float(np.sum((y_true - y_true.mean()) ** 2))
    r2 = 1.0 - float(np.sum(err**2)) / sst if sst > 0 else 0.0
    dir_acc = float(np.mean(np.sign(np.diff(y_pred)) == np.sign(np.diff(y_true))))
    return mse, mae, r2, dir_acc


@dataclass(frozen=True)
class ForecastReport:
    qlike: float
    mse: float
    mae: float
    r2: float
    dir_acc: float
    dm_stat: float | None = None
    dm_p: float | None = None


def dm_test(errors_a, errors_b, loss: str = "squared", horizon: int = 1):
    """Diebold-Mariano statistic with Newey-West variance (lag horizon-1).

    loss="squared" squares the raw forecast errors; loss="qlike_series"
    treats the inputs as per-day loss terms already. Returns (stat, p) with
    a two-sided normal p-value; a zero-variance differential returns
    (None, None) as the degenerate flag.
    """
    a = np.asarray(errors_a, dtype=float)
    b = np.asarray(errors_b, dtype=float)
    if a.shape != b.shape or len(a) < 10:
        raise ValueError("need equal-length series of at least 10 points")
    if loss == "squared":
        d = a**2 - b**2
    elif loss == "qlike_series":
        d = a - b
    else:
        raise ValueError(f"unknown loss {loss!r}")
    n = len(d)
    d_bar = float(np.mean(d))
    centered = d - d_bar
    var = float(np.mean(centered**2))
    for k in range(1, horizon):
        gamma = float(np.mean(centered[k:] * centered[:-k]))
        var += 2.0 * (1.0 - k / horizon) * gamma
    if var <= 0:
        return None, None
    stat = d_bar / np.sqrt(var / n)
    p = 2.0 * (1.0 - stats.norm.cdf(abs(stat)))
    return float(stat), float(p)


# ---------------------------------------------------------------------------
# market-regime statistics and tests


@dataclass(frozen=True)
class RegimeStats:
    mu_ann: float
    sigma_ann: float
    skew: float
    kurtosis: float  # Pearson (non-excess) convention
    max_drawdown: float
    sharpe: float | None


@dataclass(frozen=True)
class RegimeTests:
    t_stat: float
    t_p: float
    bf_stat: float
    bf_p: float
    ks_d: float
    ks_p: float


def regime_stats(returns) -> RegimeStats:
    """Annualized moments plus drawdown/Sharpe of a daily return sample."""
    r = np.asarray(returns, dtype=float)
    if len(r) < 10:
        raise ValueError("need at least 10 observations")
    mu_ann = float(PERIODS_PER_YEAR * np.mean(r))
    sigma_ann = float(np.sqrt(PERIODS_PER_YEAR) * np.std(r, ddof=1))
    equity = np.cumprod(1.0 + r)
    return RegimeStats(
        mu_ann=mu_ann,
        sigma_ann=sigma_ann,
        skew=float(stats.skew(r)),
        kurtosis=float(stats.kurtosis(r, fisher=False)),
        max_drawdown=max_drawdown(np.concatenate([[1.0], equity])),
        sharpe=sharpe_ratio(mu_ann, sigma_ann),
    )


def regime_tests(returns_a, returns_b) -> RegimeTests:
    """Welch t (means), Brown-Forsythe (variances), two-sample KS (shape)."""
    a = np.asarray(returns_a, dtype=float)
    b = np.asarray(returns_b, dtype=float)
    if len(a) < 10 or len(b) < 10:
        raise ValueError("need at least 10 observations per sample")
    t_stat, t_p = stats.ttest_ind(a, b, equal_var=False)
    bf_stat, bf_p = stats.levene(a, b, center="median")
    ks = stats.ks_2samp(a, b, method="asymp")
    return RegimeTests(
        t_stat=float(t_stat),
        t_p=float(t_p),
        bf_stat=float(bf_stat),
        bf_p=float(bf_p),
        ks_d=float(ks.statistic),
        ks_p=float(ks.pvalue),
    )
