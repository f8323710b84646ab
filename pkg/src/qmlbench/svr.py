"""Epsilon-insensitive support vector regression with an SMO dual solver.

The dual is solved over the paired variables (alpha_i, alpha_i*) using
maximal-violating-pair working-set selection; convergence is certified by
the KKT gap dropping below tolerance, and the bias comes from the final
violating-pair bracket. Kernels: linear, polynomial, RBF, or a precomputed
(typically quantum fidelity) Gram matrix.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .qkernel import FeatureMapSpec, KernelMatrix, kernel_cross, kernel_matrix

KERNELS = ("linear", "poly", "rbf", "precomputed")

KKT_TOL = 1e-3
PSD_TOL = -1e-6  # precomputed kernels more negative than this get clipped


@dataclass(frozen=True)
class SvrSpec:
    kernel: str
    c: float = 1.0
    epsilon: float = 0.1
    gamma: str | float = "scale"
    degree: int = 3
    coef0: float = 0.0

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.c <= 0:
            raise ValueError("C must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.kernel == "poly" and self.degree not in (2, 3):
            raise ValueError("polynomial degree must be 2 or 3")
        if self.coef0 < 0:
            raise ValueError("coef0 must be non-negative")
        if isinstance(self.gamma, str) and self.gamma not in ("scale", "auto"):
            raise ValueError("gamma must be 'scale', 'auto' or a number")


def _gamma_value(spec: SvrSpec, X: np.ndarray) -> float:
    if isinstance(spec.gamma, (int, float)):
        return float(spec.gamma)
    d = X.shape[1]
    if spec.gamma == "auto":
        return 1.0 / d
    var = float(X.var())
    return 1.0 / (d * var) if var > 0 else 1.0 / d


def classical_kernel(spec: SvrSpec, x_i, x_j, gamma: float | None = None) -> float:
    """Single kernel entry; gamma defaults to 'auto' resolution on the pair."""
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    if x_i.shape != x_j.shape:
        raise ValueError("dimension mismatch")
    if gamma is None:
        gamma = _gamma_value(spec, x_i[None, :]) if spec.gamma != "scale" else 1.0 / len(x_i)
    if spec.kernel == "linear":
        return float(x_i @ x_j)
    if spec.kernel == "rbf":
        return float(np.exp(-gamma * np.sum((x_i - x_j) ** 2)))
    if spec.kernel == "poly":
        return float((gamma * (x_i @ x_j) + spec.coef0) ** spec.degree)
    raise ValueError("precomputed kernel has no closed form")


def _gram(spec: SvrSpec, A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    if spec.kernel == "linear":
        return A @ B.T
    if spec.kernel == "rbf":
        sq = np.sum(A**2, axis=1)[:, None] + np.sum(B**2, axis=1)[None, :] - 2.0 * A @ B.T
        return np.exp(-gamma * np.maximum(sq, 0.0))
    if spec.kernel == "poly":
        return (gamma * (A @ B.T) + spec.coef0) ** spec.degree
    raise ValueError("precomputed kernel has no closed form")


def gram_matrix(spec: SvrSpec, A: np.ndarray, B: np.ndarray | None = None) -> np.ndarray:
    """Kernel block with rows from A and columns from B (defaults to A).

    Uses exactly the entries svr_fit computes internally, so feeding the
    result back through the precomputed path reproduces the explicit fit.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = A if B is None else np.atleast_2d(np.asarray(B, dtype=float))
    return _gram(spec, A, B, _gamma_value(spec, A))


def _ensure_psd(K: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues of a precomputed kernel below tolerance."""
    try:
        np.linalg.cholesky(K + 1e-12 * np.eye(len(K)))
        return K
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(K)
    if vals[0] >= PSD_TOL:
        return K
    warnings.warn(f"precomputed kernel min eigenvalue {vals[0]:.3e}; clipping to PSD")
    clipped = (vecs * np.maximum(vals, 0.0)) @ vecs.T
    return (clipped + clipped.T) / 2.0


# ---------------------------------------------------------------------------
# SMO dual solver


def _smo(K: np.ndarray, y: np.ndarray, c: float, epsilon: float,
         tol: float = KKT_TOL, max_iter: int | None = None):
    """SMO on the epsilon-SVR dual with second-order working-set selection.

    The first index maximizes the KKT violation; the partner is the
    violating index with the largest guaranteed objective decrease
    (diff^2/eta). Returns (beta, bias, kkt_gap, n_iter, converged) where
    beta = alpha - alpha*; the KKT gap is the maximal-violating-pair
    bracket width and the bias its midpoint.
    """
    n = len(y)
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    alpha = np.zeros(n)
    alpha_star = np.zeros(n)
    f = np.zeros(n)  # kernel expansion without bias
    diag2 = np.tile(np.diag(K), 2)
    zsign = np.concatenate([np.ones(n), -np.ones(n)])
    bias = 0.0
    gap = np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g_lo = y - f - epsilon  # alpha-side candidate value
        g_hi = y - f + epsilon  # alpha*-side candidate value
        up = np.concatenate(
            [np.where(alpha < c, g_lo, -np.inf), np.where(alpha_star > 0, g_hi, -np.inf)]
        )
        low = np.concatenate(
            [np.where(alpha > 0, g_lo, np.inf), np.where(alpha_star < c, g_hi, np.inf)]
        )
        i = int(np.argmax(up))
        m_up = up[i]
        m_low = float(np.min(low))
        if not (np.isfinite(m_up) and np.isfinite(m_low)):
            bias = float(np.median(y - f))
            gap = 0.0
            converged = True
            break
        gap = m_up - m_low
        bias = (m_up + m_low) / 2.0
        if gap < tol:
            converged = True
            break
        bi = i % n
        diff = m_up - low  # positive on violating partners
        # curvature along the feasible pair direction; the dual-variable
        # signs cancel, leaving the plain kernel expression
        eta = np.maximum(K[bi, bi] + diag2 - 2.0 * np.tile(K[bi], 2), 1e-12)
        with np.errstate(invalid="ignore"):
            score = np.where(diff > 0, -(diff**2) / eta, np.inf)
        j = int(np.argmin(score))
        bj = j % n
        t = diff[j] / eta[j]
        t = min(t, c - alpha[bi] if i < n else alpha_star[bi])
        t = min(t, alpha[bj] if j < n else c - alpha_star[bj])
        if i < n:
            alpha[bi] += t
        else:
            alpha_star[bi] -= t
        if j < n:
            alpha[bj] -= t
        else:
            alpha_star[bj] += t
        f += t * (K[:, bi] - K[:, bj])
    if not converged:
        warnings.warn(f"SMO hit the iteration cap ({max_iter}); KKT gap {gap:.3e}")
    return alpha - alpha_star, float(bias), float(gap), it, converged


@dataclass(frozen=True)
class SvrModel:
    """Fitted SVR: kernel expansion over support vectors plus a bias."""

    spec: SvrSpec
    sv_coef: np.ndarray  # beta at support vectors, |beta| <= C
    support: np.ndarray  # train-row indices of the support vectors
    bias: float
    gamma: float | None  # resolved value; None for precomputed kernels
    X_sv: np.ndarray | None  # retained inputs; None for precomputed kernels
    kkt_gap: float = 0.0
    n_iter: int = 0
    converged: bool = True

    @property
    def n_support(self) -> int:
        return len(self.support)


def svr_fit(spec: SvrSpec, X_or_K: np.ndarray, y: np.ndarray) -> SvrModel:
    """Fit on features (explicit kernels) or a precomputed square Gram matrix."""
    y = np.asarray(y, dtype=float)
    if len(y) < 2:
        raise ValueError("need at least 2 training samples")
    if spec.kernel == "precomputed":
        K = X_or_K.entries if isinstance(X_or_K, KernelMatrix) else np.asarray(X_or_K, dtype=float)
        if K.shape != (len(y), len(y)):
            raise ValueError("precomputed kernel must be square and match y")
        if not np.allclose(K, K.T, atol=1e-12):
            raise ValueError("precomputed kernel must be symmetric")
        K = _ensure_psd(K)
        gamma = None
        X_sv = None
    else:
        X = np.atleast_2d(np.asarray(X_or_K, dtype=float))
        if X.shape[0] != len(y):
            raise ValueError("X and y length mismatch")
        gamma = _gamma_value(spec, X)
        K = _gram(spec, X, X, gamma)
    beta, bias, gap, n_iter, converged = _smo(K, y, spec.c, spec.epsilon)
    support = np.flatnonzero(np.abs(beta) > 1e-12)
    return SvrModel(
        spec=spec,
        sv_coef=beta[support],
        support=support,
        bias=bias,
        gamma=gamma,
        X_sv=None if spec.kernel == "precomputed" else X[support],
        kkt_gap=gap,
        n_iter=n_iter,
        converged=converged,
    )


def svr_predict(model: SvrModel, X_new_or_K_cross: np.ndarray) -> np.ndarray:
    """Kernel expansion sum_i beta_i k(x_i, x) + b.

    For precomputed kernels pass the cross block with one row per new
    sample and one column per original training row.
    """
    if model.spec.kernel == "precomputed":
        K_cross = np.atleast_2d(np.asarray(X_new_or_K_cross, dtype=float))
        return K_cross[:, model.support] @ model.sv_coef + model.bias
    X_new = np.atleast_2d(np.asarray(X_new_or_K_cross, dtype=float))
    if model.n_support == 0:
        return np.full(X_new.shape[0], model.bias)
    K_cross = _gram(model.spec, X_new, model.X_sv, model.gamma)
    return K_cross @ model.sv_coef + model.bias


# ---------------------------------------------------------------------------
# hyperparameter search


@dataclass(frozen=True)
class SearchSpace:
    """Sampling ranges for one model family.

    C and epsilon are log-uniform over [1e-2, 1e2] and [1e-3, 1];
    categorical axes are uniform.
    """

    model: str  # svr_lin | svr_poly | svr_rbf | qsvr_angle | qsvr_amplitude
    c_range: tuple[float, float] = (1e-2, 1e2)
    epsilon_range: tuple[float, float] = (1e-3, 1.0)
    degree_choices: tuple[int, ...] = (2, 3)
    gamma_choices: tuple[str, ...] = ("scale", "auto")
    qubit_choices: tuple[int, ...] = (6, 8, 10, 12)
    layer_choices: tuple[int, ...] = (0, 1, 2, 3)
    beta_choices: tuple[int, ...] = (1, 2, 3)
    map_seed: int = 0

    def sample(self, rng: np.random.Generator):
        """One trial point: SvrSpec, or (SvrSpec, FeatureMapSpec) for QSVR."""
        c = float(np.exp(rng.uniform(*np.log(self.c_range))))
        eps = float(np.exp(rng.uniform(*np.log(self.epsilon_range))))
        if self.model == "svr_lin":
            return SvrSpec("linear", c=c, epsilon=eps)
        if self.model == "svr_poly":
            return SvrSpec(
                "poly",
                c=c,
                epsilon=eps,
                degree=int(rng.choice(self.degree_choices)),
                gamma=str(rng.choice(self.gamma_choices)),
            )
        if self.model == "svr_rbf":
            return SvrSpec("rbf", c=c, epsilon=eps, gamma=str(rng.choice(self.gamma_choices)))
        if self.model == "qsvr_angle":
            fmap = FeatureMapSpec(
                "angle",
                n_qubits=int(rng.choice(self.qubit_choices)),
                layers=int(rng.choice(self.layer_choices)),
                seed=self.map_seed,
            )
            return SvrSpec("precomputed", c=c, epsilon=eps), fmap
        if self.model == "qsvr_amplitude":
            fmap = FeatureMapSpec(
                "amplitude",
                n_qubits=int(rng.choice(self.qubit_choices)),
                layers=int(rng.choice(self.layer_choices)),
                beta=int(rng.choice(self.beta_choices)),
                seed=self.map_seed,
            )
            return SvrSpec("precomputed", c=c, epsilon=eps), fmap
        raise ValueError(f"unknown model family {self.model!r}")


@dataclass(frozen=True)
class SearchResult:
    best_params: object
    best_score: float
    scores: tuple[float, ...] = field(default=())


def hyper_search(space: SearchSpace, objective, budget: int, seed: int) -> SearchResult:
    """Seeded random search; returns the argmin of `objective` over trials.

    The objective receives the sampled spec (or spec pair) and returns a
    score to minimize, e.g. validation QLIKE. Trials that raise ValueError
    or RuntimeError score +inf; if every trial fails the search errors out.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    best_params, best_score = None, np.inf
    scores = []
    for _ in range(budget):
        params = space.sample(rng)
        try:
            score = float(objective(params))
        except (ValueError, RuntimeError) as exc:
            warnings.warn(f"search trial failed: {exc}")
            score = np.inf
        scores.append(score)
        if score < best_score:
            best_params, best_score = params, score
    if best_params is None:
        raise RuntimeError("every search trial failed")
    return SearchResult(best_params=best_params, best_score=best_score, scores=tuple(scores))
