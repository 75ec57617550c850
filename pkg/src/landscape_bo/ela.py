"""Cheap exploratory-landscape-analysis features of an evaluated design.

Five groups, 38 features in a fixed order (``FEATURE_NAMES``):

* ``ela_distr`` (3)  distribution of the objective values
* ``ela_meta``  (9)  fit quality of linear / quadratic regression models
* ``disp``      (16) dispersion of the best points relative to the whole sample
* ``ic``        (5)  information content of slopes along a nearest-neighbour tour
* ``nbc``       (5)  nearest-neighbour vs. nearest-better distances

None of these evaluate the objective; they only read ``design.points`` and
``design.values``. Degenerate inputs produce NaN entries whose reason code is
recorded in ``FeatureVector.flags``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from scipy.spatial.distance import pdist, squareform

DISP_QUANTILES = (0.02, 0.05, 0.10, 0.25)
IC_EPSILONS = 10.0 ** np.linspace(-5.0, 15.0, 1000)
IC_SETTLING = 0.05
KDE_GRID = 512
RIDGE_LAMBDA = 1e-8

_Q_TAGS = ("02", "05", "10", "25")

FEATURE_NAMES: Tuple[str, ...] = (
    "ela_distr.skewness",
    "ela_distr.kurtosis",
    "ela_distr.number_of_peaks",
    "ela_meta.lin_simple.adj_r2",
    "ela_meta.lin_simple.intercept",
    "ela_meta.lin_simple.coef.min",
    "ela_meta.lin_simple.coef.max",
    "ela_meta.lin_simple.coef.max_by_min",
    "ela_meta.lin_w_interact.adj_r2",
    "ela_meta.quad_simple.adj_r2",
    "ela_meta.quad_simple.cond",
    "ela_meta.quad_w_interact.adj_r2",
    *[f"disp.ratio_mean_{q}" for q in _Q_TAGS],
    *[f"disp.ratio_median_{q}" for q in _Q_TAGS],
    *[f"disp.diff_mean_{q}" for q in _Q_TAGS],
    *[f"disp.diff_median_{q}" for q in _Q_TAGS],
    "ic.h_max",
    "ic.eps_s",
    "ic.eps_max",
    "ic.eps_ratio",
    "ic.m0",
    "nbc.nn_nb.sd_ratio",
    "nbc.nn_nb.mean_ratio",
    "nbc.nn_nb.cor",
    "nbc.dist_ratio.coeff_var",
    "nbc.nb_fitness.cor",
)

Flags = Dict[str, str]


@dataclass
class FeatureVector:
    values: Dict[str, float]
    flags: Flags = field(default_factory=dict)

    def __post_init__(self):
        if tuple(self.values) != FEATURE_NAMES:
            raise ValueError("feature values must follow the canonical order")

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def as_array(self) -> np.ndarray:
        return np.array([self.values[n] for n in FEATURE_NAMES], dtype=float)

    def to_dict(self) -> Dict:
        return {
            "values": {k: (None if np.isnan(v) else float(v)) for k, v in self.values.items()},
            "flags": dict(self.flags),
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "FeatureVector":
        vals = {n: (np.nan if d["values"][n] is None else float(d["values"][n]))
                for n in FEATURE_NAMES}
        return cls(vals, dict(d.get("flags", {})))

    @classmethod
    def from_array(cls, arr, flags: Flags | None = None) -> "FeatureVector":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"expected {len(FEATURE_NAMES)} features, got {arr.shape}")
        return cls(dict(zip(FEATURE_NAMES, arr.tolist())), dict(flags or {}))


def _xy(design) -> Tuple[np.ndarray, np.ndarray]:
    return np.asarray(design.points, dtype=float), np.asarray(design.values, dtype=float)


def _nan(out: Dict[str, float], flags: Flags, name: str, reason: str) -> None:
    out[name] = np.nan
    flags[name] = reason


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt(np.sum(a * a) * np.sum(b * b))
    if not den > 0:
        return np.nan
    return float(np.clip(np.sum(a * b) / den, -1.0, 1.0))


# ---------------------------------------------------------------------------
# y-distribution


def silverman_bandwidth(y: np.ndarray) -> float:
    """Silverman's rule of thumb, ``0.9 * min(sd, IQR/1.34) * n^-1/5``."""
    n = len(y)
    sd = float(np.std(y, ddof=1))
    q75, q25 = np.percentile(y, [75, 25])
    lo = min(sd, (q75 - q25) / 1.34)
    if not lo > 0:
        lo = sd if sd > 0 else (abs(float(y[0])) or 1.0)
    return 0.9 * lo * n ** -0.2


def kde_peaks(y: np.ndarray) -> int:
    h = silverman_bandwidth(y)
    grid = np.linspace(y.min() - 3 * h, y.max() + 3 * h, KDE_GRID)
    dens = np.exp(-0.5 * ((grid[:, None] - y[None, :]) / h) ** 2).sum(axis=1)
    inner = dens[1:-1]
    return int(np.sum((inner > dens[:-2]) & (inner > dens[2:])))


def ela_distribution(design) -> Tuple[Dict[str, float], Flags]:
    _, y = _xy(design)
    if len(y) < 4:
        raise ValueError("y-distribution features need at least 4 samples")
    out: Dict[str, float] = {}
    flags: Flags = {}
    c = y - y.mean()
    m2 = np.mean(c**2)
    if not m2 > 0:
        _nan(out, flags, "ela_distr.skewness", "constant_values")
        _nan(out, flags, "ela_distr.kurtosis", "constant_values")
        out["ela_distr.number_of_peaks"] = 1.0
        return out, flags
    out["ela_distr.skewness"] = float(np.mean(c**3) / m2**1.5)
    out["ela_distr.kurtosis"] = float(np.mean(c**4) / m2**2 - 3.0)
    out["ela_distr.number_of_peaks"] = float(kde_peaks(y))
    return out, flags


# ---------------------------------------------------------------------------
# meta-model


def meta_design_matrix(X: np.ndarray, model: str) -> np.ndarray:
    """Columns: intercept, then model terms. ``model`` in lin, lin_interact, quad, quad_interact."""
    n, d = X.shape
    cols = [np.ones(n)] + [X[:, j] for j in range(d)]
    if model in ("lin_interact", "quad_interact"):
        cols += [X[:, i] * X[:, j] for i, j in itertools.combinations(range(d), 2)]
    if model in ("quad", "quad_interact"):
        cols += [X[:, j] ** 2 for j in range(d)]
    return np.column_stack(cols)


def _least_squares(A: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, bool]:
    if np.linalg.matrix_rank(A) < A.shape[1]:
        beta = np.linalg.solve(A.T @ A + RIDGE_LAMBDA * np.eye(A.shape[1]), A.T @ y)
        return beta, True
    beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    return beta, False


def adjusted_r2(y: np.ndarray, fitted: np.ndarray, n_terms: int) -> float:
    n = len(y)
    ss_tot = np.sum((y - y.mean()) ** 2)
    if not ss_tot > 0 or n - n_terms - 1 <= 0:
        return np.nan
    r2 = 1.0 - np.sum((y - fitted) ** 2) / ss_tot
    return float(1.0 - (1.0 - r2) * (n - 1) / (n - n_terms - 1))


def ela_meta(design) -> Tuple[Dict[str, float], Flags]:
    X, y = _xy(design)
    n, d = X.shape
    out: Dict[str, float] = {}
    flags: Flags = {}
    constant = not np.ptp(y) > 0

    fits = {}
    for model in ("lin", "lin_interact", "quad", "quad_interact"):
        A = meta_design_matrix(X, model)
        p = A.shape[1] - 1
        if n <= A.shape[1]:
            fits[model] = (None, p, "too_few_samples", None)
            continue
        beta, ridge = _least_squares(A, y)
        if ridge:
            flags[f"ela_meta.{model}.fit"] = "rank_deficient_ridge"
        fits[model] = (beta, p, None, A @ beta)

    def r2_of(model: str, name: str):
        entry = fits[model]
        if entry[0] is None:
            _nan(out, flags, name, entry[2])
        elif constant:
            _nan(out, flags, name, "constant_values")
        else:
            val = adjusted_r2(y, entry[3], entry[1])
            if np.isnan(val):
                _nan(out, flags, name, "too_few_samples")
            else:
                out[name] = val

    r2_of("lin", "ela_meta.lin_simple.adj_r2")
    lin = fits["lin"][0]
    if lin is None:
        for k in ("intercept", "coef.min", "coef.max", "coef.max_by_min"):
            _nan(out, flags, f"ela_meta.lin_simple.{k}", "too_few_samples")
    else:
        coefs = np.abs(lin[1:])
        out["ela_meta.lin_simple.intercept"] = float(lin[0])
        out["ela_meta.lin_simple.coef.min"] = float(coefs.min())
        out["ela_meta.lin_simple.coef.max"] = float(coefs.max())
        if coefs.min() > 0:
            out["ela_meta.lin_simple.coef.max_by_min"] = float(coefs.max() / coefs.min())
        else:
            _nan(out, flags, "ela_meta.lin_simple.coef.max_by_min", "zero_coefficient")
    r2_of("lin_interact", "ela_meta.lin_w_interact.adj_r2")
    r2_of("quad", "ela_meta.quad_simple.adj_r2")
    quad = fits["quad"][0]
    if quad is None:
        _nan(out, flags, "ela_meta.quad_simple.cond", "too_few_samples")
    else:
        qc = np.abs(quad[1 + d:])
        if qc.min() > 0:
            out["ela_meta.quad_simple.cond"] = float(qc.max() / qc.min())
        else:
            _nan(out, flags, "ela_meta.quad_simple.cond", "zero_coefficient")
    r2_of("quad_interact", "ela_meta.quad_w_interact.adj_r2")
    return {k: out[k] for k in FEATURE_NAMES if k in out}, flags


# ---------------------------------------------------------------------------
# dispersion


def disp_subset(y: np.ndarray, q: float) -> np.ndarray:
    """Indices of points at or below the type-7 ``q``-quantile (at least the 2 best)."""
    thr = np.quantile(y, q)
    idx = np.flatnonzero(y <= thr)
    if len(idx) < 2:
        idx = np.sort(np.argsort(y, kind="stable")[:2])
    return idx


def disp(design) -> Tuple[Dict[str, float], Flags]:
    X, y = _xy(design)
    if len(y) < 8:
        raise ValueError("dispersion features need at least 8 samples")
    out: Dict[str, float] = {}
    flags: Flags = {}
    full = pdist(X)
    full_mean, full_median = full.mean(), np.median(full)
    for q, tag in zip(DISP_QUANTILES, _Q_TAGS):
        sub = pdist(X[disp_subset(y, q)])
        m, md = sub.mean(), np.median(sub)
        for kind, num, den in (("mean", m, full_mean), ("median", md, full_median)):
            name = f"disp.ratio_{kind}_{tag}"
            if den > 0:
                out[name] = float(num / den)
            else:
                _nan(out, flags, name, "zero_distances")
        out[f"disp.diff_mean_{tag}"] = float(m - full_mean)
        out[f"disp.diff_median_{tag}"] = float(md - full_median)
    return {k: out[k] for k in FEATURE_NAMES if k in out}, flags


# ---------------------------------------------------------------------------
# information content


def nearest_neighbour_tour(X: np.ndarray) -> np.ndarray:
    """Greedy tour starting at index 0, always stepping to the closest unvisited point."""
    n = len(X)
    D = squareform(pdist(X))
    visited = np.zeros(n, dtype=bool)
    tour = [0]
    visited[0] = True
    for _ in range(n - 1):
        row = np.where(visited, np.inf, D[tour[-1]])
        nxt = int(np.argmin(row))
        tour.append(nxt)
        visited[nxt] = True
    return np.array(tour)


def tour_slopes(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    tour = nearest_neighbour_tour(X)
    dx = np.linalg.norm(np.diff(X[tour], axis=0), axis=1)
    dy = np.diff(y[tour])
    keep = dx > 0
    return dy[keep] / dx[keep]


def symbolize(slopes: np.ndarray, eps) -> np.ndarray:
    """Map slopes to {-1, 0, 1}; broadcasting ``eps`` as a column gives one row per epsilon."""
    eps = np.asarray(eps, dtype=float)
    s = np.asarray(slopes, dtype=float)
    if eps.ndim == 1:
        eps = eps[:, None]
    return np.where(np.abs(s) <= eps, 0, np.sign(s)).astype(np.int8)


def information_entropy(symbols: np.ndarray) -> np.ndarray:
    """Entropy (base 6) of consecutive unequal symbol pairs; rows are independent strings."""
    S = np.atleast_2d(symbols).astype(int)
    n_pairs = S.shape[1] - 1
    if n_pairs < 1:
        return np.zeros(S.shape[0])
    codes = (S[:, :-1] + 1) * 3 + (S[:, 1:] + 1)
    H = np.zeros(S.shape[0])
    for a, b in itertools.permutations((-1, 0, 1), 2):
        p = np.sum(codes == (a + 1) * 3 + (b + 1), axis=1) / n_pairs
        with np.errstate(divide="ignore", invalid="ignore"):
            H -= np.where(p > 0, p * np.log(p) / np.log(6.0), 0.0)
    return H


def partial_information(symbols: np.ndarray) -> float:
    s = np.asarray(symbols)
    if len(s) == 0:
        return np.nan
    nz = s[s != 0]
    runs = 0 if len(nz) == 0 else 1 + int(np.sum(nz[1:] != nz[:-1]))
    return runs / len(s)


def ic_curve(design) -> Tuple[np.ndarray, np.ndarray]:
    X, y = _xy(design)
    slopes = tour_slopes(X, y)
    return IC_EPSILONS, information_entropy(symbolize(slopes, IC_EPSILONS))


def ic(design) -> Tuple[Dict[str, float], Flags]:
    X, y = _xy(design)
    if len(y) < 10:
        raise ValueError("information-content features need at least 10 samples")
    out: Dict[str, float] = {}
    flags: Flags = {}
    slopes = tour_slopes(X, y)
    if len(slopes) < 2:
        for k in ("h_max", "eps_s", "eps_max", "eps_ratio", "m0"):
            _nan(out, flags, f"ic.{k}", "coincident_points")
        return out, flags
    eps = IC_EPSILONS
    H = information_entropy(symbolize(slopes, eps))
    h_max = float(H.max())
    out["ic.h_max"] = h_max
    out["ic.eps_s"] = float(np.log10(eps[np.argmax(H < IC_SETTLING)]))
    out["ic.eps_max"] = float(np.log10(eps[int(np.argmax(H))]))
    above = np.flatnonzero(H > 0.5 * h_max)
    if h_max > 0 and len(above):
        out["ic.eps_ratio"] = float(np.log10(eps[above[-1]]))
    else:
        _nan(out, flags, "ic.eps_ratio", "flat_entropy")
    out["ic.m0"] = partial_information(symbolize(slopes, [0.0])[0])
    return {k: out[k] for k in FEATURE_NAMES if k in out}, flags


# ---------------------------------------------------------------------------
# nearest-better clustering


def nearest_better(X: np.ndarray, y: np.ndarray):
    """Per point: nn distance, nb distance (NaN for points with no strictly better
    point), and the index of the nearest better point (-1 if none)."""
    n = len(y)
    D = squareform(pdist(X))
    off = D + np.diag(np.full(n, np.inf))
    nn = off.min(axis=1)
    nb = np.full(n, np.nan)
    nb_idx = np.full(n, -1)
    for i in range(n):
        better = np.flatnonzero(y < y[i])
        if len(better) == 0:
            continue
        d = D[i, better]
        # ties: closer first, then better value
        j = better[np.lexsort((y[better], d))[0]]
        nb[i] = D[i, j]
        nb_idx[i] = j
    return nn, nb, nb_idx


def nbc(design) -> Tuple[Dict[str, float], Flags]:
    X, y = _xy(design)
    if len(y) < 5:
        raise ValueError("nearest-better features need at least 5 samples")
    names = [n for n in FEATURE_NAMES if n.startswith("nbc.")]
    out: Dict[str, float] = {}
    flags: Flags = {}
    if not np.ptp(y) > 0:
        for name in names:
            _nan(out, flags, name, "constant_values")
        return out, flags
    nn, nb, nb_idx = nearest_better(X, y)
    has = nb_idx >= 0
    a, b = nn[has], nb[has]

    def put(name, val, reason):
        if np.isfinite(val):
            out[name] = float(val)
        else:
            _nan(out, flags, name, reason)

    if len(a) >= 2:
        sd_b = np.std(b, ddof=1)
        put("nbc.nn_nb.sd_ratio", np.std(a, ddof=1) / sd_b if sd_b > 0 else np.nan, "zero_variance")
        put("nbc.nn_nb.mean_ratio", a.mean() / b.mean() if b.mean() > 0 else np.nan, "zero_distances")
        put("nbc.nn_nb.cor", _pearson(a, b), "zero_variance")
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = a / b
        ok = np.isfinite(ratio).all() and ratio.mean() > 0
        put("nbc.dist_ratio.coeff_var",
            np.std(ratio, ddof=1) / ratio.mean() if ok else np.nan, "zero_distances")
    else:
        for name in names[:4]:
            _nan(out, flags, name, "too_few_samples")
    indeg = np.bincount(nb_idx[has], minlength=len(y)).astype(float)
    put("nbc.nb_fitness.cor", _pearson(indeg, y), "zero_variance")
    return {k: out[k] for k in FEATURE_NAMES if k in out}, flags


# ---------------------------------------------------------------------------


def feature_vector(design) -> FeatureVector:
    values: Dict[str, float] = {}
    flags: Flags = {}
    for group in (ela_distribution, ela_meta, disp, ic, nbc):
        v, f = group(design)
        values.update(v)
        flags.update(f)
    missing = [n for n in FEATURE_NAMES if n not in values]
    if missing:
        raise RuntimeError(f"feature groups did not produce {missing}")
    return FeatureVector({n: values[n] for n in FEATURE_NAMES}, flags)


def feature_names() -> List[str]:
    return list(FEATURE_NAMES)
