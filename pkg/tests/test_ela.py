import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from landscape_bo import ela
from landscape_bo.bbob import instantiate
from landscape_bo.doe import Design, design_key, sample_design

from conftest import make_design


# --- independent brute-force oracles -----------------------------------------


def _dist(a, b):
    return math.sqrt(sum((u - v) ** 2 for u, v in zip(a, b)))


def _pairs(P):
    return [_dist(P[i], P[j]) for i in range(len(P)) for j in range(i + 1, len(P))]


def _median(v):
    v = sorted(v)
    n = len(v)
    return v[n // 2] if n % 2 else 0.5 * (v[n // 2 - 1] + v[n // 2])


def _quantile7(v, q):
    v = sorted(v)
    h = (len(v) - 1) * q
    lo = math.floor(h)
    return v[lo] + (h - lo) * (v[min(lo + 1, len(v) - 1)] - v[lo])


def disp_oracle(X, y):
    X, y = X.tolist(), y.tolist()
    full = _pairs(X)
    fm, fmd = sum(full) / len(full), _median(full)
    out = {}
    for q, tag in zip((0.02, 0.05, 0.10, 0.25), ("02", "05", "10", "25")):
        thr = _quantile7(y, q)
        idx = [i for i in range(len(y)) if y[i] <= thr]
        if len(idx) < 2:
            idx = sorted(sorted(range(len(y)), key=lambda i: (y[i], i))[:2])
        sub = _pairs([X[i] for i in idx])
        m, md = sum(sub) / len(sub), _median(sub)
        out[f"disp.ratio_mean_{tag}"] = m / fm
        out[f"disp.ratio_median_{tag}"] = md / fmd
        out[f"disp.diff_mean_{tag}"] = m - fm
        out[f"disp.diff_median_{tag}"] = md - fmd
    return out


def _sd(v):
    m = sum(v) / len(v)
    return math.sqrt(sum((x - m) ** 2 for x in v) / (len(v) - 1))


def _cor(a, b):
    ma, mb = sum(a) / len(a), sum(b) / len(b)
    num = sum((x - ma) * (z - mb) for x, z in zip(a, b))
    return num / math.sqrt(sum((x - ma) ** 2 for x in a) * sum((z - mb) ** 2 for z in b))


def nbc_oracle(X, y):
    X, y = X.tolist(), y.tolist()
    n = len(y)
    nn, nb, target = [], [], [None] * n
    for i in range(n):
        nn_i = min(_dist(X[i], X[j]) for j in range(n) if j != i)
        better = [(_dist(X[i], X[j]), y[j], j) for j in range(n) if y[j] < y[i]]
        if better:
            d, _, j = min(better)
            nn.append(nn_i)
            nb.append(d)
            target[i] = j
    ratio = [a / b for a, b in zip(nn, nb)]
    indeg = [sum(1 for t in target if t == i) for i in range(n)]
    return {
        "nbc.nn_nb.sd_ratio": _sd(nn) / _sd(nb),
        "nbc.nn_nb.mean_ratio": (sum(nn) / len(nn)) / (sum(nb) / len(nb)),
        "nbc.nn_nb.cor": _cor(nn, nb),
        "nbc.dist_ratio.coeff_var": _sd(ratio) / (sum(ratio) / len(ratio)),
        "nbc.nb_fitness.cor": _cor(indeg, y),
    }


def crafted_designs():
    g = np.random.default_rng(2024)
    X1 = g.uniform(-5, 5, (20, 2))
    y1 = (X1**2).sum(axis=1)
    X2 = g.uniform(-5, 5, (20, 3))
    y2 = np.sin(X2).sum(axis=1) + 0.1 * X2[:, 0]
    # uneven lattice: many tied distances, tied values along rows
    cols, rows = np.array([0.0, 1.0, 2.5, 4.5, 7.0]), np.array([0.0, 1.3, 2.1, 4.0])
    X3 = np.array([[c, r] for r in rows for c in cols])
    y3 = np.abs(X3[:, 0] - 2.5) + 0.37 * X3[:, 1] ** 1.5
    return [(X1, y1), (X2, y2), (X3, y3)]


# --- tests -----------------------------------------------------------------------


class TestNames:
    def test_golden_names(self):
        assert len(ela.FEATURE_NAMES) == 38 == len(set(ela.FEATURE_NAMES))
        assert ela.FEATURE_NAMES[:3] == ("ela_distr.skewness", "ela_distr.kurtosis",
                                         "ela_distr.number_of_peaks")
        assert ela.FEATURE_NAMES[12] == "disp.ratio_mean_02"
        assert ela.FEATURE_NAMES[28] == "ic.h_max"
        assert ela.FEATURE_NAMES[-1] == "nbc.nb_fitness.cor"
        groups = [n.split(".")[0] for n in ela.FEATURE_NAMES]
        assert [groups.count(g) for g in ("ela_distr", "ela_meta", "disp", "ic", "nbc")] == [3, 9, 16, 5, 5]


class TestDistribution:
    def test_symmetric_skewness(self):
        d = make_design(np.arange(5)[:, None] * np.ones((1, 2)), [-2, -1, 0, 1, 2])
        assert abs(ela.ela_distribution(d)[0]["ela_distr.skewness"]) < 1e-12

    def test_normal_kurtosis(self):
        y = np.random.default_rng(0).standard_normal(10_000)
        d = make_design(np.zeros((len(y), 1)) + np.arange(len(y))[:, None], y)
        assert abs(ela.ela_distribution(d)[0]["ela_distr.kurtosis"]) < 0.2

    def test_bimodal_peaks(self):
        g = np.random.default_rng(1)
        y = np.concatenate([g.normal(0, 0.05, 25), g.normal(10, 0.05, 25)])
        d = make_design(np.arange(50)[:, None] * np.ones((1, 2)), y)
        assert ela.ela_distribution(d)[0]["ela_distr.number_of_peaks"] == 2

    def test_constant(self):
        out, flags = ela.ela_distribution(make_design(np.eye(5), np.ones(5)))
        assert math.isnan(out["ela_distr.skewness"]) and flags["ela_distr.skewness"] == "constant_values"
        assert out["ela_distr.number_of_peaks"] == 1

    def test_scipy_agreement(self):
        from scipy.stats import kurtosis, skew
        y = np.random.default_rng(3).gamma(2.0, size=40)
        out, _ = ela.ela_distribution(make_design(np.arange(40)[:, None] * np.ones((1, 2)), y))
        assert out["ela_distr.skewness"] == pytest.approx(skew(y), abs=1e-12)
        assert out["ela_distr.kurtosis"] == pytest.approx(kurtosis(y), abs=1e-12)


class TestMeta:
    def test_exact_linear(self, rng):
        X = rng.uniform(-5, 5, (50, 3))
        y = 2 + X @ np.array([1.0, -2.0, 0.5])
        out, _ = ela.ela_meta(make_design(X, y))
        assert out["ela_meta.lin_simple.adj_r2"] == pytest.approx(1, abs=1e-9)
        assert out["ela_meta.lin_simple.intercept"] == pytest.approx(2, abs=1e-9)
        assert out["ela_meta.lin_simple.coef.max_by_min"] == pytest.approx(4, rel=1e-9)

    def test_sphere_quadratic(self, rng):
        X = rng.uniform(-5, 5, (50, 3))
        X -= X.mean(axis=0)
        out, _ = ela.ela_meta(make_design(X, (X**2).sum(axis=1)))
        assert out["ela_meta.quad_simple.adj_r2"] == pytest.approx(1, abs=1e-9)
        assert out["ela_meta.quad_simple.cond"] == pytest.approx(1, abs=1e-6)

    def test_normal_equations_oracle(self, rng):
        X = rng.uniform(-2, 2, (60, 3))
        y = X[:, 0] ** 3 - X[:, 1] * X[:, 2] + 0.5 * X[:, 2] ** 3 + rng.normal(0, 0.1, 60)
        out, _ = ela.ela_meta(make_design(X, y))

        def oracle(cols):
            A = np.column_stack([np.ones(len(y))] + cols)
            beta = np.linalg.solve(A.T @ A, A.T @ y)  # normal equations, not lstsq
            res = y - A @ beta
            r2 = 1 - res @ res / ((y - y.mean()) @ (y - y.mean()))
            k = A.shape[1] - 1
            return 1 - (1 - r2) * (len(y) - 1) / (len(y) - k - 1)

        lin = [X[:, j] for j in range(3)]
        inter = [X[:, i] * X[:, j] for i, j in [(0, 1), (0, 2), (1, 2)]]
        sq = [X[:, j] ** 2 for j in range(3)]
        expect = {
            "ela_meta.lin_simple.adj_r2": oracle(lin),
            "ela_meta.lin_w_interact.adj_r2": oracle(lin + inter),
            "ela_meta.quad_simple.adj_r2": oracle(lin + sq),
            "ela_meta.quad_w_interact.adj_r2": oracle(lin + inter + sq),
        }
        for k, v in expect.items():
            assert out[k] == pytest.approx(v, abs=1e-8), k

    def test_rank_deficient_flag(self):
        X = np.column_stack([np.linspace(-1, 1, 30), np.linspace(-1, 1, 30)])  # collinear
        out, flags = ela.ela_meta(make_design(X, X[:, 0] ** 2))
        assert flags.get("ela_meta.lin.fit") == "rank_deficient_ridge"
        assert all(np.isfinite(v) or k in flags for k, v in out.items())


class TestDisp:
    @pytest.mark.parametrize("case", range(3))
    def test_brute_force(self, case):
        X, y = crafted_designs()[case]
        out, _ = ela.disp(make_design(X, y))
        for k, v in disp_oracle(X, y).items():
            assert abs(out[k] - v) < 1e-10, k

    def test_identical_points(self):
        out, flags = ela.disp(make_design(np.zeros((10, 2)), np.arange(10.0)))
        assert all(math.isnan(out[f"disp.ratio_mean_{t}"]) for t in ("02", "05", "10", "25"))
        assert flags["disp.ratio_median_25"] == "zero_distances"
        assert all(out[f"disp.diff_mean_{t}"] == 0 for t in ("02", "05", "10", "25"))

    def test_full_subset(self):
        # q-quantile of a two-valued sample covers every point
        X = np.random.default_rng(4).uniform(-5, 5, (12, 2))
        out, _ = ela.disp(make_design(X, np.ones(12)))
        assert out["disp.ratio_mean_02"] == pytest.approx(1.0, abs=1e-15)
        assert out["disp.diff_median_25"] == 0.0

    def test_too_small(self):
        with pytest.raises(ValueError):
            ela.disp(make_design(np.eye(4), np.arange(4.0)))


class TestIc:
    def test_alternating_entropy(self):
        # 10 points on a line, values alternate: 9 slopes +,-,+,..., 8 pairs split evenly
        X = np.arange(10.0)[:, None] * np.ones((1, 2))
        y = np.array([0.0, 1.0] * 5)
        sym = ela.symbolize(ela.tour_slopes(X, y), [0.0])[0]
        assert list(sym) == [1, -1] * 4 + [1]
        h0 = ela.information_entropy(sym)[0]
        assert h0 == pytest.approx(-2 * 0.5 * math.log(0.5, 6), abs=1e-12)
        assert h0 == pytest.approx(0.3868, abs=1e-4)

    def test_monotone_m0(self):
        X = np.arange(12.0)[:, None] * np.ones((1, 2))
        out, _ = ela.ic(make_design(X, np.arange(12.0) ** 2))
        assert out["ic.m0"] == pytest.approx(1 / 11)

    def test_flat(self):
        X = np.arange(12.0)[:, None] * np.ones((1, 2))
        out, flags = ela.ic(make_design(X, 1e-7 * np.arange(12.0)))
        assert out["ic.h_max"] == 0
        assert out["ic.eps_s"] == pytest.approx(-5.0)
        assert flags["ic.eps_ratio"] == "flat_entropy"

    def test_entropy_enumeration(self):
        sym = np.array([1, 0, -1, -1, 1, 0, 0, 1])
        pairs = list(zip(sym[:-1], sym[1:]))
        counts = {}
        for a, b in pairs:
            if a != b:
                counts[(a, b)] = counts.get((a, b), 0) + 1
        expect = -sum(c / len(pairs) * math.log(c / len(pairs), 6) for c in counts.values())
        assert ela.information_entropy(sym)[0] == pytest.approx(expect, abs=1e-14)

    def test_partial_information(self):
        assert ela.partial_information(np.array([1, 1, 0, -1, 0, -1, 1])) == pytest.approx(3 / 7)
        assert ela.partial_information(np.zeros(4, dtype=int)) == 0

    def test_tour_from_zero(self):
        X = np.array([[0.0, 0], [3, 0], [1, 0], [2, 0]])
        assert list(ela.nearest_neighbour_tour(X)) == [0, 2, 3, 1]

    def test_coincident_points_skipped(self):
        X = np.array([[0.0, 0], [0, 0], [1, 0]])
        assert len(ela.tour_slopes(X, np.array([0.0, 5.0, 1.0]))) == 1


class TestNbc:
    @pytest.mark.parametrize("case", range(3))
    def test_brute_force(self, case):
        X, y = crafted_designs()[case]
        out, _ = ela.nbc(make_design(X, y))
        for k, v in nbc_oracle(X, y).items():
            assert abs(out[k] - v) < 1e-10, k

    def test_ten_point(self):
        g = np.random.default_rng(10)
        X = g.uniform(-5, 5, (10, 2))
        y = g.normal(size=10)
        out, _ = ela.nbc(make_design(X, y))
        for k, v in nbc_oracle(X, y).items():
            assert abs(out[k] - v) < 1e-10

    def test_line_nb_is_nn(self):
        # spacing grows away from the best point, so nn distances vary and nb == nn
        x = np.cumsum(np.arange(1, 11, dtype=float))
        X = np.column_stack([x, np.zeros_like(x)])
        out, _ = ela.nbc(make_design(X, x))
        assert out["nbc.nn_nb.mean_ratio"] == pytest.approx(1.0)
        assert out["nbc.nn_nb.cor"] == pytest.approx(1.0)

    def test_permutation_invariant(self, rng):
        X, y = crafted_designs()[1]
        perm = rng.permutation(len(y))
        a, _ = ela.nbc(make_design(X, y))
        b, _ = ela.nbc(make_design(X[perm], y[perm]))
        for k in a:
            assert a[k] == pytest.approx(b[k], abs=1e-12)

    def test_constant(self):
        out, flags = ela.nbc(make_design(np.eye(6), np.ones(6)))
        assert all(math.isnan(v) for v in out.values())
        assert set(flags.values()) == {"constant_values"}


@pytest.fixture(scope="module")
def design():
    return sample_design(instantiate(3, 1, 5), 50, design_key(3, 1, 0))


class TestFeatureVector:
    def test_length_and_order(self, design):
        fv = ela.feature_vector(design)
        assert len(fv) == 38
        assert tuple(fv.values) == ela.FEATURE_NAMES

    def test_deterministic(self, design):
        a, b = ela.feature_vector(design).as_array(), ela.feature_vector(design).as_array()
        np.testing.assert_array_equal(a, b)

    def test_round_trip(self, design):
        fv = ela.feature_vector(design)
        back = ela.FeatureVector.from_dict(fv.to_dict())
        np.testing.assert_array_equal(fv.as_array(), back.as_array())

    def test_no_evaluations(self, design, monkeypatch):
        from landscape_bo import bbob

        def boom(*a, **k):
            raise AssertionError("feature computation evaluated the objective")

        monkeypatch.setattr(bbob, "evaluate_batch", boom)
        monkeypatch.setattr(bbob, "evaluate", boom)
        ela.feature_vector(design)

    def test_translation_invariance(self, design):
        shift = np.array([0.3, -0.2, 0.1, 0.05, -0.4])
        a = ela.feature_vector(design)
        b = ela.feature_vector(Design(design.points + shift, design.values))
        for name in ela.FEATURE_NAMES:
            if name.startswith(("disp.", "ic.", "nbc.")):
                assert abs(a[name] - b[name]) < 1e-9 or (math.isnan(a[name]) and math.isnan(b[name]))

    def test_value_offset_invariance(self, design):
        a = ela.feature_vector(design)
        b = ela.feature_vector(Design(design.points, design.values + 123.0))
        for name in ela.FEATURE_NAMES:
            if name.startswith(("disp.", "ic.", "nbc.")):
                assert a[name] == pytest.approx(b[name], abs=1e-9)

    def test_order_validation(self):
        with pytest.raises(ValueError):
            ela.FeatureVector({"x": 1.0})


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(10, 40), d=st.integers(2, 4))
def test_disp_nbc_match_oracles(seed, n, d):
    g = np.random.default_rng(seed)
    X = g.uniform(-5, 5, (n, d))
    y = g.normal(size=n)
    dd = make_design(X, y)
    out = {**ela.disp(dd)[0], **ela.nbc(dd)[0]}
    for k, v in {**disp_oracle(X, y), **nbc_oracle(X, y)}.items():
        assert abs(out[k] - v) < 1e-9 * max(1.0, abs(v)), k


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_features_finite_or_flagged(seed):
    g = np.random.default_rng(seed)
    X = g.uniform(-5, 5, (20, 2))
    fv = ela.feature_vector(make_design(X, g.normal(size=20)))
    for name in ela.FEATURE_NAMES:
        assert np.isfinite(fv[name]) or name in fv.flags
