"""The 24 noiseless BBOB functions with deterministic, seeded instances.

Formulas follow the published BBOB definitions. Instances are generated by
our own keyed PRNG rather than COCO's, so ``(function_id, instance_id, dim)``
always reproduces the same problem but does not match COCO numbering.

All evaluation is vectorised over rows: ``evaluate_batch(p, X)`` with
``X.shape == (n, dim)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple

import numpy as np

from .rng import generator, make_key

LOWER = -5.0
UPPER = 5.0


class FunctionInfo(NamedTuple):
    function_id: int
    name: str
    group: str
    modality: str


SUITE: Dict[int, FunctionInfo] = {
    fi.function_id: fi
    for fi in [
        FunctionInfo(1, "sphere", "separable", "unimodal"),
        FunctionInfo(2, "ellipsoidal", "separable", "unimodal"),
        FunctionInfo(3, "rastrigin", "separable", "multimodal"),
        FunctionInfo(4, "bueche-rastrigin", "separable", "multimodal"),
        FunctionInfo(5, "linear-slope", "separable", "unimodal"),
        FunctionInfo(6, "attractive-sector", "low-conditioning", "unimodal"),
        FunctionInfo(7, "step-ellipsoidal", "low-conditioning", "unimodal"),
        FunctionInfo(8, "rosenbrock", "low-conditioning", "unimodal"),
        FunctionInfo(9, "rosenbrock-rotated", "low-conditioning", "unimodal"),
        FunctionInfo(10, "ellipsoidal-rotated", "high-conditioning", "unimodal"),
        FunctionInfo(11, "discus", "high-conditioning", "unimodal"),
        FunctionInfo(12, "bent-cigar", "high-conditioning", "unimodal"),
        FunctionInfo(13, "sharp-ridge", "high-conditioning", "unimodal"),
        FunctionInfo(14, "different-powers", "high-conditioning", "unimodal"),
        FunctionInfo(15, "rastrigin-rotated", "multimodal-adequate", "multimodal"),
        FunctionInfo(16, "weierstrass", "multimodal-adequate", "multimodal"),
        FunctionInfo(17, "schaffers-f7", "multimodal-adequate", "multimodal"),
        FunctionInfo(18, "schaffers-f7-ill", "multimodal-adequate", "multimodal"),
        FunctionInfo(19, "griewank-rosenbrock", "multimodal-adequate", "multimodal"),
        FunctionInfo(20, "schwefel", "multimodal-weak", "multimodal"),
        FunctionInfo(21, "gallagher-101", "multimodal-weak", "multimodal"),
        FunctionInfo(22, "gallagher-21", "multimodal-weak", "multimodal"),
        FunctionInfo(23, "katsuura", "multimodal-weak", "multimodal"),
        FunctionInfo(24, "lunacek-bi-rastrigin", "multimodal-weak", "multimodal"),
    ]
}


@dataclass(frozen=True)
class Problem:
    function_id: int
    instance_id: int
    dim: int
    x_opt: np.ndarray
    f_opt: float
    transform: Dict[str, np.ndarray] = field(repr=False)

    @property
    def key(self):
        return (self.function_id, self.instance_id, self.dim)

    @property
    def name(self) -> str:
        return SUITE[self.function_id].name

    @property
    def bounds(self) -> np.ndarray:
        return np.array([[LOWER, UPPER]] * self.dim)

    def __call__(self, x) -> float:
        return evaluate(self, x)


# ---------------------------------------------------------------------------
# helper transformations


def t_osz(x: np.ndarray) -> np.ndarray:
    """Oscillation transformation (applied elementwise)."""
    x = np.asarray(x, dtype=float)
    nz = x != 0
    xh = np.where(nz, np.log(np.abs(np.where(nz, x, 1.0))), 0.0)
    c1 = np.where(x > 0, 10.0, 5.5)
    c2 = np.where(x > 0, 7.9, 3.1)
    return np.sign(x) * np.exp(xh + 0.049 * (np.sin(c1 * xh) + np.sin(c2 * xh)))


def t_asy(x: np.ndarray, beta: float) -> np.ndarray:
    """Asymmetry transformation; operates on the last axis."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    ramp = np.linspace(0.0, 1.0, d) if d > 1 else np.zeros(1)
    pos = x > 0
    xp = np.where(pos, x, 0.0)
    return np.where(pos, xp ** (1.0 + beta * ramp * np.sqrt(xp)), x)


def lambda_diag(alpha: float, d: int) -> np.ndarray:
    ramp = np.linspace(0.0, 1.0, d) if d > 1 else np.zeros(1)
    return alpha ** (0.5 * ramp)


def f_pen(x: np.ndarray) -> np.ndarray:
    return np.sum(np.maximum(0.0, np.abs(x) - 5.0) ** 2, axis=-1)


def _ramp(d: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, d) if d > 1 else np.zeros(1)


def _rastrigin(z: np.ndarray) -> np.ndarray:
    d = z.shape[-1]
    return 10.0 * (d - np.sum(np.cos(2 * np.pi * z), axis=-1)) + np.sum(z**2, axis=-1)


def _rosenbrock(z: np.ndarray) -> np.ndarray:
    return np.sum(
        100.0 * (z[:, :-1] ** 2 - z[:, 1:]) ** 2 + (z[:, :-1] - 1.0) ** 2, axis=-1
    )


# ---------------------------------------------------------------------------
# raw function bodies; each returns f(x) - f_opt for rows of X


def _f1(p, X):
    return np.sum((X - p.x_opt) ** 2, axis=1)


def _f2(p, X):
    z = t_osz(X - p.x_opt)
    return (z**2) @ (1e6 ** _ramp(p.dim))


def _f3(p, X):
    z = t_asy(t_osz(X - p.x_opt), 0.2) * lambda_diag(10.0, p.dim)
    return _rastrigin(z)


def _f4(p, X):
    d = p.dim
    z = t_osz(X - p.x_opt)
    s = np.tile(lambda_diag(10.0, d), (len(X), 1))
    odd = np.zeros(d, dtype=bool)
    odd[::2] = True  # 1-based odd coordinates
    s = np.where((z > 0) & odd, 10.0 * s, s)
    z = s * z
    return _rastrigin(z) + 100.0 * f_pen(X)


def _f5(p, X):
    s = np.sign(p.x_opt) * lambda_diag(100.0, p.dim)
    z = np.where(X * p.x_opt < 25.0, X, p.x_opt)
    return np.sum(5.0 * np.abs(s) - s * z, axis=1)


def _f6(p, X):
    t = p.transform
    z = (X - p.x_opt) @ t["QLR"].T
    z = np.where(z * p.x_opt > 0, 100.0 * z, z)
    return t_osz(np.sum(z**2, axis=1)) ** 0.9


def _f7(p, X):
    t = p.transform
    zh = ((X - p.x_opt) @ t["R"].T) * lambda_diag(10.0, p.dim)
    zt = np.where(np.abs(zh) > 0.5, np.floor(0.5 + zh), np.floor(0.5 + 10.0 * zh) / 10.0)
    z = zt @ t["Q"].T
    body = np.maximum(np.abs(zh[:, 0]) / 1e4, (z**2) @ (100.0 ** _ramp(p.dim)))
    return 0.1 * body + f_pen(X)


def _f8(p, X):
    c = max(1.0, np.sqrt(p.dim) / 8.0)
    return _rosenbrock(c * (X - p.x_opt) + 1.0)


def _f9(p, X):
    c = max(1.0, np.sqrt(p.dim) / 8.0)
    return _rosenbrock(c * (X @ p.transform["R"].T) + 0.5)


def _f10(p, X):
    z = t_osz((X - p.x_opt) @ p.transform["R"].T)
    return (z**2) @ (1e6 ** _ramp(p.dim))


def _f11(p, X):
    z = t_osz((X - p.x_opt) @ p.transform["R"].T)
    return 1e6 * z[:, 0] ** 2 + np.sum(z[:, 1:] ** 2, axis=1)


def _f12(p, X):
    R = p.transform["R"]
    z = t_asy((X - p.x_opt) @ R.T, 0.5) @ R.T
    return z[:, 0] ** 2 + 1e6 * np.sum(z[:, 1:] ** 2, axis=1)


def _f13(p, X):
    z = (X - p.x_opt) @ p.transform["QLR"].T
    return z[:, 0] ** 2 + 100.0 * np.sqrt(np.sum(z[:, 1:] ** 2, axis=1))


def _f14(p, X):
    z = (X - p.x_opt) @ p.transform["R"].T
    return np.sqrt(np.sum(np.abs(z) ** (2.0 + 4.0 * _ramp(p.dim)), axis=1))


def _f15(p, X):
    t = p.transform
    z = t_asy(t_osz((X - p.x_opt) @ t["R"].T), 0.2) @ t["RLQ"].T
    return _rastrigin(z)


_WEIERSTRASS_K = np.arange(12)
_WEIERSTRASS_A = 0.5**_WEIERSTRASS_K
_WEIERSTRASS_B = 3.0**_WEIERSTRASS_K
_WEIERSTRASS_F0 = float(np.sum(_WEIERSTRASS_A * np.cos(np.pi * _WEIERSTRASS_B)))


def _f16(p, X):
    t = p.transform
    z = t_osz((X - p.x_opt) @ t["R"].T) @ t["RLQ"].T
    terms = _WEIERSTRASS_A * np.cos(2 * np.pi * _WEIERSTRASS_B * (z[..., None] + 0.5))
    inner = np.sum(terms, axis=(1, 2)) / p.dim
    # inner >= f0 holds termwise; clamp the last ulp so the cube stays >= 0
    return 10.0 * np.maximum(inner - _WEIERSTRASS_F0, 0.0) ** 3 + 10.0 / p.dim * f_pen(X)


def _schaffers(p, X, key):
    t = p.transform
    z = t_asy((X - p.x_opt) @ t["R"].T, 0.5) @ t[key].T
    s = np.sqrt(z[:, :-1] ** 2 + z[:, 1:] ** 2)
    body = np.mean(np.sqrt(s) + np.sqrt(s) * np.sin(50.0 * s**0.2) ** 2, axis=1)
    return body**2 + 10.0 * f_pen(X)


def _f17(p, X):
    return _schaffers(p, X, "L10Q")


def _f18(p, X):
    return _schaffers(p, X, "L1000Q")


def _f19(p, X):
    c = max(1.0, np.sqrt(p.dim) / 8.0)
    z = c * (X @ p.transform["R"].T) + 0.5
    s = 100.0 * (z[:, :-1] ** 2 - z[:, 1:]) ** 2 + (z[:, :-1] - 1.0) ** 2
    return 10.0 / (p.dim - 1) * np.sum(s / 4000.0 - np.cos(s), axis=1) + 10.0


_SCHWEFEL_CONST = 4.189828872724339


def _f20(p, X):
    sgn = np.sign(p.x_opt)
    two_abs = 2.0 * np.abs(p.x_opt)
    xh = 2.0 * sgn * X
    zh = xh.copy()
    zh[:, 1:] = xh[:, 1:] + 0.25 * (xh[:, :-1] - two_abs[:-1])
    z = 100.0 * (lambda_diag(10.0, p.dim) * (zh - two_abs) + two_abs)
    body = -np.sum(z * np.sin(np.sqrt(np.abs(z))), axis=1) / (100.0 * p.dim)
    return body + _SCHWEFEL_CONST + 100.0 * f_pen(z / 100.0)


def _gallagher(p, X):
    t = p.transform
    R, peaks, inv_cov, heights = t["R"], t["peaks"], t["inv_cov"], t["heights"]
    diff = X[:, None, :] - peaks[None, :, :]
    rd = diff @ R.T
    q = np.sum(inv_cov[None, :, :] * rd**2, axis=2)
    g = np.max(heights[None, :] * np.exp(-0.5 / p.dim * q), axis=1)
    return t_osz(10.0 - g) ** 2 + f_pen(X)


_KATSUURA_POW = 2.0 ** np.arange(1, 33)


def _f23(p, X):
    d = p.dim
    z = (X - p.x_opt) @ p.transform["QLR"].T
    a = z[..., None] * _KATSUURA_POW
    inner = np.sum(np.abs(a - np.floor(a + 0.5)) / _KATSUURA_POW, axis=2)
    prod = np.prod((1.0 + np.arange(1, d + 1) * inner) ** (10.0 / d**1.2), axis=1)
    return 10.0 / d**2 * prod - 10.0 / d**2 + f_pen(X)


def _f24(p, X):
    d = p.dim
    mu0 = 2.5
    s = 1.0 - 1.0 / (2.0 * np.sqrt(d + 20.0) - 8.2)
    mu1 = -np.sqrt((mu0**2 - 1.0) / s)
    xh = 2.0 * np.sign(p.x_opt) * X
    z = (xh - mu0) @ p.transform["QLR"].T
    sphere = np.minimum(
        np.sum((xh - mu0) ** 2, axis=1), d + s * np.sum((xh - mu1) ** 2, axis=1)
    )
    return sphere + 10.0 * (d - np.sum(np.cos(2 * np.pi * z), axis=1)) + 1e4 * f_pen(X)


_BODIES: Dict[int, Callable[[Problem, np.ndarray], np.ndarray]] = {
    1: _f1, 2: _f2, 3: _f3, 4: _f4, 5: _f5, 6: _f6, 7: _f7, 8: _f8,
    9: _f9, 10: _f10, 11: _f11, 12: _f12, 13: _f13, 14: _f14, 15: _f15,
    16: _f16, 17: _f17, 18: _f18, 19: _f19, 20: _f20, 21: _gallagher,
    22: _gallagher, 23: _f23, 24: _f24,
}  # fmt: skip


# ---------------------------------------------------------------------------
# instance generation


def random_rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR with sign-corrected diagonal)."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _sample_fopt(rng: np.random.Generator) -> float:
    c = rng.standard_cauchy()
    return float(np.clip(np.round(100.0 * c) / 100.0, -1000.0, 1000.0))


def instantiate(function_id: int, instance_id: int, dim: int) -> Problem:
    """Build the deterministic problem instance for ``(function_id, instance_id, dim)``."""
    if int(function_id) != function_id or not 1 <= function_id <= 24:
        raise ValueError(f"function_id must be in 1..24, got {function_id!r}")
    if int(dim) != dim or dim < 2:
        raise ValueError(f"dim must be an integer >= 2, got {dim!r}")
    if int(instance_id) != instance_id or instance_id < 0:
        raise ValueError(f"instance_id must be a non-negative integer, got {instance_id!r}")
    function_id, instance_id, dim = int(function_id), int(instance_id), int(dim)

    rng = generator(make_key("bbob", function_id, instance_id, dim))
    f_opt = _sample_fopt(rng)
    x_opt = rng.uniform(-4.0, 4.0, size=dim)
    R = random_rotation(rng, dim)
    Q = random_rotation(rng, dim)
    t: Dict[str, np.ndarray] = {"R": R, "Q": Q}

    fid = function_id
    if fid == 4:
        x_opt[::2] = np.abs(x_opt[::2])
    elif fid == 5:
        x_opt = 5.0 * np.where(x_opt >= 0, 1.0, -1.0)
    elif fid == 8:
        x_opt = 0.75 * x_opt
    elif fid in (9, 19):
        c = max(1.0, np.sqrt(dim) / 8.0)
        # solves c * R x + 0.5 == 1
        x_opt = R.T @ np.full(dim, 0.5 / c)
    elif fid == 20:
        x_opt = 0.5 * 4.2096874633 * np.where(x_opt >= 0, 1.0, -1.0)
    elif fid == 24:
        x_opt = 1.25 * np.where(x_opt >= 0, 1.0, -1.0)
    elif fid in (21, 22):
        n_peaks, best_cond, span = (101, 1000.0**0.5, 5.0) if fid == 21 else (21, 1000.0, 4.9)
        others = rng.uniform(-span, span, size=(n_peaks - 1, dim))
        x_opt = span / 5.0 * x_opt
        conds = 1000.0 ** np.linspace(0.0, 1.0, n_peaks - 1)
        conds = np.concatenate([[best_cond], rng.permutation(conds)])
        inv_cov = np.empty((n_peaks, dim))
        for i, c in enumerate(conds):
            inv_cov[i] = rng.permutation(c ** np.linspace(-0.5, 0.5, dim))
        t["peaks"] = np.vstack([x_opt, others])
        t["inv_cov"] = inv_cov
        t["heights"] = np.concatenate([[10.0], np.linspace(1.1, 9.1, n_peaks - 1)])

    L10 = lambda_diag(10.0, dim)
    L100 = lambda_diag(100.0, dim)
    if fid in (6, 13):
        t["QLR"] = Q @ np.diag(L10) @ R
    elif fid == 15:
        t["RLQ"] = R @ np.diag(L10) @ Q
    elif fid == 16:
        t["RLQ"] = R @ np.diag(lambda_diag(0.01, dim)) @ Q
    elif fid == 17:
        t["L10Q"] = np.diag(L10) @ Q
    elif fid == 18:
        t["L1000Q"] = np.diag(lambda_diag(1000.0, dim)) @ Q
    elif fid in (23, 24):
        t["QLR"] = Q @ np.diag(L100) @ R

    for v in t.values():
        v.setflags(write=False)
    x_opt = np.array(x_opt, dtype=float)
    x_opt.setflags(write=False)
    return Problem(fid, instance_id, dim, x_opt, f_opt, t)


# ---------------------------------------------------------------------------
# evaluation


def _check_rows(p: Problem, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != p.dim:
        raise ValueError(f"expected points of dimension {p.dim}, got shape {X.shape}")
    if np.isnan(X).any():
        raise ValueError("NaN in evaluation point")
    if not np.isfinite(X).all():
        raise ValueError("non-finite evaluation point")
    return X


def evaluate_batch(p: Problem, X) -> np.ndarray:
    X = _check_rows(p, X)
    body = _BODIES[p.function_id]
    # row by row: BLAS picks different kernels for different batch sizes, and a
    # point's value must not depend on which batch it was evaluated in
    return np.array([body(p, X[i:i + 1])[0] for i in range(len(X))]) + p.f_opt


def evaluate(p: Problem, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("evaluate expects a single point; use evaluate_batch for rows")
    return float(evaluate_batch(p, x)[0])


def regret(p: Problem, y: float) -> float:
    """Distance of ``y`` above the optimum, clamped at zero."""
    return max(float(y) - p.f_opt, 0.0)


def suite_listing() -> List[FunctionInfo]:
    return [SUITE[i] for i in sorted(SUITE)]
