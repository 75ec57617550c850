"""Gaussian-process surrogate: ARD Matern-5/2 kernel, Cholesky inference,
type-II maximum likelihood via seeded multi-start Nelder-Mead."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .bbob import LOWER, UPPER
from .rng import StreamKey, generator

_SQRT5 = math.sqrt(5.0)
_LOG_2PI = math.log(2.0 * math.pi)


class SurrogateError(RuntimeError):
    """The kernel matrix could not be factorised even after jitter escalation."""


@dataclass(frozen=True)
class GpConfig:
    lengthscale_bounds: Tuple[float, float] = (1e-3, 1e3)
    signal_bounds: Tuple[float, float] = (1e-3, 1e3)
    restarts: int = 3
    max_evals: int = 200
    jitter_ladder: Tuple[float, ...] = (1e-10, 1e-8, 1e-6, 1e-4)

    @classmethod
    def from_dict(cls, d) -> "GpConfig":
        d = dict(d or {})
        for k in ("lengthscale_bounds", "signal_bounds", "jitter_ladder"):
            if k in d:
                d[k] = tuple(float(v) for v in d[k])
        return cls(**d)


@dataclass(frozen=True)
class KernelParams:
    signal_variance: float
    lengthscales: np.ndarray
    jitter: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "lengthscales", np.asarray(self.lengthscales, dtype=float))
        if self.signal_variance <= 0 or (self.lengthscales <= 0).any() or self.jitter < 0:
            raise ValueError("kernel parameters must be positive")

    def to_theta(self) -> np.ndarray:
        return np.concatenate([np.log(self.lengthscales), [math.log(self.signal_variance)]])

    @classmethod
    def from_theta(cls, theta, jitter: float) -> "KernelParams":
        theta = np.asarray(theta, dtype=float)
        return cls(float(np.exp(theta[-1])), np.exp(theta[:-1]), jitter)


def sq_diffs(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Per-dimension squared differences, shape (len(A), len(B), dim)."""
    return (A[:, None, :] - B[None, :, :]) ** 2


def matern52(D2: np.ndarray, params: KernelParams) -> np.ndarray:
    r = np.sqrt(np.maximum(D2 @ (1.0 / params.lengthscales**2), 0.0))
    return params.signal_variance * (1.0 + _SQRT5 * r + 5.0 / 3.0 * r * r) * np.exp(-_SQRT5 * r)


def _lml_from_d2(
    theta: np.ndarray, D2: np.ndarray, y: np.ndarray, jitter: float, grad: bool = False
):
    params = KernelParams.from_theta(theta, jitter)
    n = len(y)
    K = matern52(D2, params)
    K[np.diag_indices(n)] += jitter
    try:
        L = cholesky(K, lower=True, check_finite=False)
    except (LinAlgError, ValueError) as exc:
        raise SurrogateError(str(exc)) from exc
    alpha = cho_solve((L, True), y, check_finite=False)
    lml = -0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * _LOG_2PI
    if not grad:
        return lml
    # d/d log(l_j): s2 * 5/3 (1 + sqrt5 r) exp(-sqrt5 r) * (d_j / l_j)^2
    W = D2 / params.lengthscales**2
    r = np.sqrt(np.maximum(W.sum(axis=2), 0.0))
    base = params.signal_variance * 5.0 / 3.0 * (1.0 + _SQRT5 * r) * np.exp(-_SQRT5 * r)
    inner = np.outer(alpha, alpha) - cho_solve((L, True), np.eye(n), check_finite=False)
    g = np.empty(len(theta))
    g[:-1] = 0.5 * np.einsum("ij,ijk->k", inner * base, W)
    Kf = K.copy()
    Kf[np.diag_indices(n)] -= jitter
    g[-1] = 0.5 * np.sum(inner * Kf)
    return lml, g


def log_marginal_likelihood(params: KernelParams, X: np.ndarray, y: np.ndarray) -> float:
    """Exact Gaussian log marginal likelihood of ``y`` at inputs ``X`` (model space)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    return float(_lml_from_d2(params.to_theta(), sq_diffs(X, X), y, params.jitter))


def lml_gradient(params: KernelParams, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of the LML w.r.t. (log lengthscales..., log signal variance)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _, g = _lml_from_d2(params.to_theta(), sq_diffs(X, X), np.asarray(y, float), params.jitter, True)
    return g


@dataclass
class GpModel:
    train_points: np.ndarray
    train_targets: np.ndarray
    y_mean: float
    y_scale: float
    params: KernelParams
    chol: np.ndarray
    alpha: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    fit_trace: List[Tuple[np.ndarray, float, float]] = field(default_factory=list, repr=False)

    @property
    def dim(self) -> int:
        return self.train_points.shape[1]

    def normalize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.lower) / (self.upper - self.lower)

    def predict_batch(self, X) -> Tuple[np.ndarray, np.ndarray]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(f"expected dimension {self.dim}, got {X.shape[1]}")
        Z = self.normalize(X)
        Ks = matern52(sq_diffs(Z, self.train_points), self.params)
        mu = Ks @ self.alpha
        v = solve_triangular(self.chol, Ks.T, lower=True, check_finite=False)
        var = np.maximum(self.params.signal_variance - np.sum(v * v, axis=0), 0.0)
        return mu * self.y_scale + self.y_mean, np.sqrt(var) * self.y_scale

    def predict(self, x) -> Tuple[float, float]:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise ValueError("predict expects a single point")
        mu, sd = self.predict_batch(x[None, :])
        return float(mu[0]), float(sd[0])

    @property
    def prior_std(self) -> float:
        return math.sqrt(self.params.signal_variance) * self.y_scale


def _factorize(K: np.ndarray, ladder: Sequence[float]):
    n = len(K)
    for jitter in ladder:
        Kj = K.copy()
        Kj[np.diag_indices(n)] += jitter
        try:
            return cholesky(Kj, lower=True, check_finite=False), jitter
        except (LinAlgError, ValueError):
            continue
    raise SurrogateError("Cholesky failed after jitter escalation")


def condition(
    X: np.ndarray,
    y: np.ndarray,
    params: KernelParams,
    config: Optional[GpConfig] = None,
    bounds: Optional[np.ndarray] = None,
) -> GpModel:
    """Posterior for fixed hyperparameters (no optimisation)."""
    config = config or GpConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if bounds is None:
        lower, upper = np.full(X.shape[1], LOWER), np.full(X.shape[1], UPPER)
    else:
        bounds = np.asarray(bounds, dtype=float)
        lower, upper = bounds[:, 0], bounds[:, 1]
    Z = (X - lower) / (upper - lower)
    y_mean = float(np.mean(y))
    y_scale = float(np.std(y))
    if not y_scale > 0:
        y_scale = 1.0
    t = (y - y_mean) / y_scale
    K = matern52(sq_diffs(Z, Z), params)
    ladder = [j for j in config.jitter_ladder if j >= params.jitter] or [params.jitter]
    L, jitter = _factorize(K, ladder)
    params = KernelParams(params.signal_variance, params.lengthscales, jitter)
    alpha = cho_solve((L, True), t, check_finite=False)
    return GpModel(Z, t, y_mean, y_scale, params, L, alpha, lower, upper)


def fit(
    X,
    y,
    config: Optional[GpConfig] = None,
    key: StreamKey = (),
    bounds: Optional[np.ndarray] = None,
) -> GpModel:
    """Fit hyperparameters by maximising the LML from ``config.restarts`` seeded starts."""
    config = config or GpConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(y) < 2 or len(X) != len(y):
        raise ValueError("need at least 2 observations with matching targets")
    d = X.shape[1]
    if bounds is None:
        lower, upper = np.full(d, LOWER), np.full(d, UPPER)
    else:
        bounds = np.asarray(bounds, dtype=float)
        lower, upper = bounds[:, 0], bounds[:, 1]
    Z = (X - lower) / (upper - lower)
    y_mean = float(np.mean(y))
    y_scale = float(np.std(y))
    if not y_scale > 0:
        y_scale = 1.0
    t = (y - y_mean) / y_scale
    D2 = sq_diffs(Z, Z)

    lo = np.concatenate([np.full(d, math.log(config.lengthscale_bounds[0])),
                         [math.log(config.signal_bounds[0])]])
    hi = np.concatenate([np.full(d, math.log(config.lengthscale_bounds[1])),
                         [math.log(config.signal_bounds[1])]])
    ladder = tuple(config.jitter_ladder)

    def neg_lml(theta):
        theta = np.clip(theta, lo, hi)
        for jitter in ladder:
            try:
                return -_lml_from_d2(theta, D2, t, jitter)
            except SurrogateError:
                continue
        return 1e25

    rng = generator(key)
    starts = [np.concatenate([np.full(d, math.log(0.5)), [0.0]])]
    for _ in range(max(config.restarts, 1) - 1):
        starts.append(np.concatenate([rng.uniform(math.log(0.05), math.log(2.0), d),
                                      [rng.uniform(math.log(0.1), math.log(10.0))]]))
    starts = [np.clip(s, lo, hi) for s in starts]

    trace = []
    best_theta, best_val = None, np.inf
    for s in starts:
        simplex = np.vstack([s] + [s + 0.5 * e for e in np.eye(d + 1)])
        res = minimize(
            neg_lml, s, method="Nelder-Mead", bounds=list(zip(lo, hi)),
            options={"maxfev": config.max_evals, "initial_simplex": np.clip(simplex, lo, hi),
                     "xatol": 1e-4, "fatol": 1e-8},
        )
        theta = np.clip(res.x, lo, hi)
        val = neg_lml(theta)
        trace.append((s, -neg_lml(s), -val))
        if val < best_val:
            best_theta, best_val = theta, val
    if not np.isfinite(best_val) or best_val >= 1e25:
        raise SurrogateError("no hyperparameter setting admits a Cholesky factorisation")

    params = KernelParams.from_theta(best_theta, ladder[0])
    K = matern52(D2, params)
    L, jitter = _factorize(K, ladder)
    params = KernelParams(params.signal_variance, params.lengthscales, jitter)
    alpha = cho_solve((L, True), t, check_finite=False)
    return GpModel(Z, t, y_mean, y_scale, params, L, alpha, lower, upper, trace)
