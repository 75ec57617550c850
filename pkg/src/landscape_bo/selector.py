"""Per-run schedule selection.

A multi-output random forest maps the 38 ELA features of a run's initial
design to the normalised final log-regret of each of the seven schedules.
The selector (AFS) picks the schedule with the lowest prediction; the
virtual best solver (VBS) picks the one that was actually best.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .acquisition import SCHEDULE_IDS
from .ela import FEATURE_NAMES, FeatureVector
from .rng import generator, make_key

log = logging.getLogger(__name__)

FOREST_SCHEMA_VERSION = 1
RowKey = Tuple[int, int, int, int]  # function, instance, dim, seed


class InsufficientDataError(ValueError):
    pass


# ---------------------------------------------------------------------------
# dataset


@dataclass
class Dataset:
    keys: List[RowKey]
    features: np.ndarray  # (n, 38), may hold NaN
    targets: np.ndarray  # (n, 7) normalised to [0, 1]
    raw: np.ndarray  # (n, 7) final log-regret before normalisation
    split: np.ndarray  # (n,) of "train" / "test"
    flags: Dict[str, List[str]] = field(default_factory=dict)
    feature_names: Tuple[str, ...] = FEATURE_NAMES
    target_order: Tuple[str, ...] = SCHEDULE_IDS

    def __len__(self) -> int:
        return len(self.keys)

    def subset(self, part: str) -> "Dataset":
        m = self.split == part
        return Dataset([k for k, keep in zip(self.keys, m) if keep], self.features[m],
                       self.targets[m], self.raw[m], self.split[m], self.flags,
                       self.feature_names, self.target_order)

    @property
    def train(self) -> "Dataset":
        return self.subset("train")

    @property
    def test(self) -> "Dataset":
        return self.subset("test")

    # csv round trip --------------------------------------------------------
    def to_csv(self, path) -> None:
        import csv

        header = (["function_id", "instance_id", "dim", "seed", "split"]
                  + list(self.feature_names)
                  + [f"target.{s}" for s in self.target_order]
                  + [f"raw.{s}" for s in self.target_order])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i, k in enumerate(self.keys):
                w.writerow(list(k) + [self.split[i]]
                           + [_fmt(v) for v in self.features[i]]
                           + [_fmt(v) for v in self.targets[i]]
                           + [_fmt(v) for v in self.raw[i]])

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        import csv

        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        keys = [(int(r["function_id"]), int(r["instance_id"]), int(r["dim"]), int(r["seed"]))
                for r in rows]
        feats = np.array([[_parse(r[n]) for n in FEATURE_NAMES] for r in rows]).reshape(-1, len(FEATURE_NAMES))
        targ = np.array([[_parse(r[f"target.{s}"]) for s in SCHEDULE_IDS] for r in rows]).reshape(-1, 7)
        raw = np.array([[_parse(r[f"raw.{s}"]) for s in SCHEDULE_IDS] for r in rows]).reshape(-1, 7)
        split = np.array([r["split"] for r in rows], dtype=object)
        return cls(keys, feats, targ, raw, split)


def _fmt(v: float) -> str:
    return "nan" if np.isnan(v) else repr(float(v))


def _parse(s: str) -> float:
    return float("nan") if s in ("", "nan", "NaN") else float(s)


def minmax_normalize(values: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Min-max scale to [0, 1]; a zero-spread group maps to 0.5 and reports ``True``."""
    values = np.asarray(values, dtype=float)
    lo, hi = np.min(values), np.max(values)
    if not hi > lo:
        return np.full(values.shape, 0.5), True
    return (values - lo) / (hi - lo), False


def stratified_split(keys: Sequence[RowKey], seed: int, train_fraction: float = 0.7) -> np.ndarray:
    """70/30 split by run, stratified by (function, instance, dim)."""
    groups: Dict[Tuple[int, int, int], List[int]] = defaultdict(list)
    for i, k in enumerate(keys):
        groups[k[:3]].append(i)
    split = np.empty(len(keys), dtype=object)
    for g, idx in groups.items():
        idx = sorted(idx, key=lambda i: keys[i])
        perm = generator(make_key("split", seed, *g)).permutation(len(idx))
        n_train = int(round(train_fraction * len(idx)))
        for rank, j in enumerate(perm):
            split[idx[j]] = "train" if rank < n_train else "test"
    return split


def build_dataset(records: Iterable, split_seed: int = 0, train_fraction: float = 0.7) -> Dataset:
    """One row per (function, instance, dim, seed) with all seven schedules present."""
    by_key: Dict[RowKey, Dict[str, object]] = defaultdict(dict)
    for r in records:
        by_key[r.problem_key][r.schedule_id] = r
    keys: List[RowKey] = []
    dropped = []
    for k in sorted(by_key):
        if all(s in by_key[k] for s in SCHEDULE_IDS):
            keys.append(k)
        else:
            dropped.append(k)
    if dropped:
        log.warning("dropping %d rows with incomplete schedule coverage: %s", len(dropped), dropped[:5])

    raw = np.array([[by_key[k][s].final_log_regret for s in SCHEDULE_IDS] for k in keys]).reshape(-1, 7)
    feats = np.empty((len(keys), len(FEATURE_NAMES)))
    for i, k in enumerate(keys):
        fv = by_key[k][SCHEDULE_IDS[0]].features
        if fv is None:
            raise ValueError(f"run {k} has no features")
        feats[i] = fv.as_array()

    targets = np.empty_like(raw)
    flags: Dict[str, List[str]] = {"dropped": [list(k) for k in dropped], "degenerate": []}
    groups: Dict[Tuple[int, int], List[int]] = defaultdict(list)
    for i, k in enumerate(keys):
        groups[(k[0], k[2])].append(i)
    for g, idx in groups.items():
        norm, degenerate = minmax_normalize(raw[idx])
        targets[idx] = norm
        if degenerate:
            flags["degenerate"].append(list(g))
    split = stratified_split(keys, split_seed, train_fraction)
    return Dataset(keys, feats, targets, raw, split, flags)


# ---------------------------------------------------------------------------
# forest


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: Optional[int] = None
    min_leaf: int = 1
    max_features: Optional[int] = None  # default ceil(sqrt(n_features))

    @classmethod
    def from_dict(cls, d) -> "ForestConfig":
        return cls(**dict(d or {}))


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_outputs)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            a = np.flatnonzero(active)
            nd = node[a]
            go_left = X[a, self.feature[nd]] <= self.threshold[nd]
            node[a] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self):
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Tree":
        return cls(np.array(d["feature"], dtype=int), np.array(d["threshold"], dtype=float),
                   np.array(d["left"], dtype=int), np.array(d["right"], dtype=int),
                   np.array(d["value"], dtype=float))


def _best_split(X, Y, idx, features, min_leaf):
    """Lowest summed per-output SSE over the candidate features; None if no valid cut."""
    m = len(idx)
    best = None
    for f in features:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        ys = Y[idx[order]]
        cs = np.cumsum(ys, axis=0)
        cs2 = np.cumsum(ys * ys, axis=0)
        n_l = np.arange(1, m)
        s_l, s2_l = cs[:-1], cs2[:-1]
        s_r, s2_r = cs[-1] - s_l, cs2[-1] - s2_l
        n_r = m - n_l
        sse = (np.sum(s2_l - s_l**2 / n_l[:, None], axis=1)
               + np.sum(s2_r - s_r**2 / n_r[:, None], axis=1))
        valid = (xs[1:] > xs[:-1]) & (n_l >= min_leaf) & (n_r >= min_leaf)
        if not valid.any():
            continue
        sse = np.where(valid, sse, np.inf)
        i = int(np.argmin(sse))
        if best is None or sse[i] < best[0] - 1e-12:
            thr = 0.5 * (xs[i] + xs[i + 1])
            if not thr < xs[i + 1]:
                thr = xs[i]
            best = (sse[i], f, thr)
    return best


def grow_tree(X: np.ndarray, Y: np.ndarray, rng: np.random.Generator, config: ForestConfig) -> Tree:
    n_features = X.shape[1]
    k = config.max_features or math.ceil(math.sqrt(n_features))
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(Y[idx].mean(axis=0))
        return len(feature) - 1

    root = new_node(np.arange(len(X)))
    stack = [(root, np.arange(len(X)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if len(idx) < 2 * config.min_leaf:
            continue
        if config.max_depth is not None and depth >= config.max_depth:
            continue
        if np.all(np.ptp(Y[idx], axis=0) <= 0):
            continue
        perm = rng.permutation(n_features)
        split = _best_split(X, Y, idx, perm[:k], config.min_leaf)
        if split is None:
            # like sklearn, keep drawing features until one admits a cut
            split = _best_split(X, Y, idx, perm[k:], config.min_leaf)
        if split is None:
            continue
        _, f, thr = split
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        l_node, r_node = new_node(li), new_node(ri)
        feature[node], threshold[node] = int(f), float(thr)
        left[node], right[node] = l_node, r_node
        stack.append((r_node, ri, depth + 1))
        stack.append((l_node, li, depth + 1))
    return Tree(np.array(feature, dtype=int), np.array(threshold, dtype=float),
                np.array(left, dtype=int), np.array(right, dtype=int), np.array(value, dtype=float))


@dataclass
class Forest:
    trees: List[Tree]
    config: ForestConfig
    seed: int
    imputation: np.ndarray
    target_min: np.ndarray
    target_max: np.ndarray
    feature_names: Tuple[str, ...] = FEATURE_NAMES
    target_order: Tuple[str, ...] = SCHEDULE_IDS
    meta: Dict = field(default_factory=dict)

    @classmethod
    def fit(
        cls,
        X: np.ndarray,
        Y: np.ndarray,
        keys: Optional[Sequence] = None,
        config: Optional[ForestConfig] = None,
        seed: int = 0,
        feature_names: Sequence[str] = FEATURE_NAMES,
        target_order: Sequence[str] = SCHEDULE_IDS,
    ) -> "Forest":
        config = config or ForestConfig()
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if len(X) < 10:
            raise InsufficientDataError(f"need at least 10 training rows, got {len(X)}")
        if X.shape[1] != len(feature_names) or Y.shape[1] != len(target_order):
            raise ValueError("feature/target widths do not match the declared names")
        # bootstrap over rows in key order so row order in the input does not matter
        if keys is not None:
            order = sorted(range(len(X)), key=lambda i: tuple(keys[i]))
            X, Y = X[order], Y[order]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN columns
            med = np.nanmedian(X, axis=0)
        med = np.where(np.isnan(med), 0.0, med)
        Xi = np.where(np.isnan(X), med, X)
        trees = []
        for t in range(config.n_trees):
            rng = generator(make_key("forest", seed, t))
            boot = rng.integers(0, len(Xi), len(Xi))
            trees.append(grow_tree(Xi[boot], Y[boot], rng, config))
        return cls(trees, config, int(seed), med, Y.min(axis=0), Y.max(axis=0),
                   tuple(feature_names), tuple(target_order))

    def _matrix(self, x) -> np.ndarray:
        if isinstance(x, FeatureVector):
            x = x.as_array()
        X = np.asarray(x, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.feature_names):
            raise ValueError(f"expected {len(self.feature_names)} features, got {X.shape[1]}")
        return np.where(np.isnan(X), self.imputation, X)

    def predict_batch(self, X) -> np.ndarray:
        X = self._matrix(X)
        return np.mean([t.predict(X) for t in self.trees], axis=0)

    # serialization ---------------------------------------------------------
    def to_dict(self) -> Dict:
        return {
            "schema_version": FOREST_SCHEMA_VERSION,
            "kind": "landscape_bo.forest",
            "config": asdict(self.config),
            "seed": self.seed,
            "feature_names": list(self.feature_names),
            "target_order": list(self.target_order),
            "imputation": self.imputation.tolist(),
            "target_min": self.target_min.tolist(),
            "target_max": self.target_max.tolist(),
            "meta": self.meta,
            "trees": [t.to_dict() for t in self.trees],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def from_dict(cls, d: Dict) -> "Forest":
        if d.get("schema_version") != FOREST_SCHEMA_VERSION:
            raise ValueError(f"unsupported forest schema {d.get('schema_version')!r}")
        return cls([Tree.from_dict(t) for t in d["trees"]], ForestConfig(**d["config"]),
                   int(d["seed"]), np.array(d["imputation"], dtype=float),
                   np.array(d["target_min"], dtype=float), np.array(d["target_max"], dtype=float),
                   tuple(d["feature_names"]), tuple(d["target_order"]), dict(d.get("meta", {})))

    @classmethod
    def load(cls, path) -> "Forest":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def train_forest(ds: Dataset, config: Optional[ForestConfig] = None, seed: int = 0) -> Forest:
    """Train on the dataset's train rows (all rows if none are labelled)."""
    part = ds.train if (ds.split == "train").any() else ds
    forest = Forest.fit(part.features, part.targets, part.keys, config, seed,
                        ds.feature_names, ds.target_order)
    forest.meta["train_keys"] = [list(k) for k in part.keys]
    return forest


def predict_forest(f: Forest, x) -> np.ndarray:
    X = f._matrix(x)
    if len(X) != 1:
        raise ValueError("predict_forest takes a single feature vector")
    return f.predict_batch(X)[0]


def argmin_schedule(values: Sequence[float], order: Sequence[str] = SCHEDULE_IDS) -> str:
    v = np.asarray(values, dtype=float)
    if v.shape != (len(order),):
        raise ValueError(f"expected {len(order)} values")
    return order[int(np.argmin(v))]  # first minimum = canonical-order tie-break


def select(f: Forest, x) -> str:
    return argmin_schedule(predict_forest(f, x), f.target_order)


def vbs(targets: Sequence[float]) -> str:
    t = np.asarray(targets, dtype=float)
    if not np.isfinite(t).all():
        raise ValueError("VBS needs finite targets")
    return argmin_schedule(t)
