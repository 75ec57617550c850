"""Result aggregation: per-function normalisation, per-run ranks, convergence curves."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata

from .acquisition import SCHEDULE_IDS
from .rng import generator, make_key

RowKey = Tuple[int, int, int, int]
Z95 = 1.96


@dataclass
class PerformanceTable:
    keys: List[RowKey]
    raw: np.ndarray
    normalized: np.ndarray
    afs_choice: Optional[List[str]] = None
    flags: Dict[str, list] = field(default_factory=dict)
    norm_range: Dict[Tuple[int, int], Tuple[float, float]] = field(default_factory=dict)

    @property
    def vbs_choice(self) -> List[str]:
        return [SCHEDULE_IDS[int(np.argmin(r))] for r in self.normalized]

    @property
    def vbs(self) -> np.ndarray:
        return self.normalized.min(axis=1)

    @property
    def afs(self) -> np.ndarray:
        if self.afs_choice is None:
            raise ValueError("no AFS choices attached")
        idx = [SCHEDULE_IDS.index(c) for c in self.afs_choice]
        return self.normalized[np.arange(len(idx)), idx]

    def with_choices(self, choices: Sequence[str]) -> "PerformanceTable":
        if len(choices) != len(self.keys):
            raise ValueError("one AFS choice per row required")
        return PerformanceTable(self.keys, self.raw, self.normalized, list(choices),
                                self.flags, self.norm_range)

    def to_csv(self, path) -> None:
        header = ["function_id", "instance_id", "dim", "seed", *SCHEDULE_IDS, "vbs", "vbs_choice"]
        if self.afs_choice is not None:
            header += ["afs", "afs_choice"]
        vbs, vbs_c = self.vbs, self.vbs_choice
        afs = self.afs if self.afs_choice is not None else None
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i, k in enumerate(self.keys):
                row = [*k, *map(repr, self.normalized[i].tolist()), repr(float(vbs[i])), vbs_c[i]]
                if afs is not None:
                    row += [repr(float(afs[i])), self.afs_choice[i]]
                w.writerow(row)


def normalize_per_function(keys: Sequence[RowKey], raw: np.ndarray) -> PerformanceTable:
    """Min-max scale final log-regrets over all runs and schedules of each function.

    Groups are (function_id, dim); a group without spread is filled with 0.5
    and flagged.
    """
    raw = np.asarray(raw, dtype=float)
    keys = [tuple(k) for k in keys]
    out = np.empty_like(raw)
    groups: Dict[Tuple[int, int], List[int]] = defaultdict(list)
    for i, k in enumerate(keys):
        groups[(k[0], k[2])].append(i)
    flags: Dict[str, list] = {"degenerate": []}
    ranges = {}
    for g, idx in groups.items():
        block = raw[idx]
        lo, hi = float(block.min()), float(block.max())
        ranges[g] = (lo, hi)
        if hi > lo:
            out[idx] = (block - lo) / (hi - lo)
        else:
            out[idx] = 0.5
            flags["degenerate"].append(list(g))
    return PerformanceTable(keys, raw, out, None, flags, ranges)


@dataclass
class RankRow:
    ranks: np.ndarray  # 7 schedule ranks, ties averaged
    afs: Optional[float]
    vbs: float


def rank_per_run(values: Sequence[float], afs_choice: Optional[str] = None) -> RankRow:
    v = np.asarray(values, dtype=float)
    if v.shape != (len(SCHEDULE_IDS),) or not np.isfinite(v).all():
        raise ValueError("need 7 finite schedule values")
    ranks = rankdata(v, method="average")
    afs = None if afs_choice is None else float(ranks[SCHEDULE_IDS.index(afs_choice)])
    return RankRow(ranks, afs, float(ranks[int(np.argmin(v))]))


@dataclass
class RankTable:
    keys: List[RowKey]
    ranks: np.ndarray
    afs: Optional[np.ndarray]
    vbs: np.ndarray

    def mean_ranks(self) -> Dict[str, float]:
        out = {s: float(self.ranks[:, j].mean()) for j, s in enumerate(SCHEDULE_IDS)}
        out["vbs"] = float(self.vbs.mean())
        if self.afs is not None:
            out["afs"] = float(self.afs.mean())
        return out

    def to_csv(self, path) -> None:
        header = ["function_id", "instance_id", "dim", "seed", *SCHEDULE_IDS, "vbs"]
        if self.afs is not None:
            header.append("afs")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i, k in enumerate(self.keys):
                row = [*k, *self.ranks[i].tolist(), float(self.vbs[i])]
                if self.afs is not None:
                    row.append(float(self.afs[i]))
                w.writerow(row)


def rank_table(perf: PerformanceTable) -> RankTable:
    rows = [rank_per_run(perf.raw[i], None if perf.afs_choice is None else perf.afs_choice[i])
            for i in range(len(perf.keys))]
    ranks = np.array([r.ranks for r in rows]).reshape(-1, len(SCHEDULE_IDS))
    afs = None if perf.afs_choice is None else np.array([r.afs for r in rows])
    return RankTable(list(perf.keys), ranks, afs, np.array([r.vbs for r in rows]))


# ---------------------------------------------------------------------------
# convergence


@dataclass
class ConvergenceCurve:
    mean: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n: int


def _ci(block: np.ndarray, method: str, key) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = len(block)
    mean = block.mean(axis=0)
    if n < 2:
        nan = np.full(mean.shape, np.nan)
        return mean, nan, nan
    if method == "normal":
        half = Z95 * block.std(axis=0, ddof=1) / np.sqrt(n)
        return mean, mean - half, mean + half
    if method == "bootstrap":
        rng = generator(key)
        boots = np.array([block[rng.integers(0, n, n)].mean(axis=0) for _ in range(1000)])
        return mean, np.percentile(boots, 2.5, axis=0), np.percentile(boots, 97.5, axis=0)
    raise ValueError(f"unknown CI method {method!r}")


def convergence_summary(
    runs: Mapping[str, Sequence[Tuple[int, Sequence[float]]]],
    ci: str = "normal",
) -> Dict[str, ConvergenceCurve]:
    """Per-iteration mean and 95% CI of normalised incumbent log-regret.

    ``runs`` maps a group label (schedule id, "afs", ...) to ``(function_id,
    log-regret trajectory)`` pairs. Each function is min-max scaled over every
    trajectory and iteration it has across all groups before averaging.
    """
    lo: Dict[int, float] = {}
    hi: Dict[int, float] = {}
    for items in runs.values():
        for fid, traj in items:
            t = np.asarray(traj, dtype=float)
            lo[fid] = min(lo.get(fid, np.inf), float(t.min()))
            hi[fid] = max(hi.get(fid, -np.inf), float(t.max()))
    out = {}
    for label, items in runs.items():
        if not items:
            continue
        rows = []
        for fid, traj in items:
            t = np.asarray(traj, dtype=float)
            span = hi[fid] - lo[fid]
            rows.append((t - lo[fid]) / span if span > 0 else np.full(t.shape, 0.5))
        block = np.vstack(rows)
        mean, low, high = _ci(block, ci, make_key("ci", label))
        out[label] = ConvergenceCurve(mean, low, high, len(rows))
    return out


def write_convergence_csv(path, curves: Mapping[str, Mapping[str, ConvergenceCurve]]) -> None:
    """``curves`` maps a scope ("all" or a function id) to per-group curves."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scope", "group", "iteration", "mean", "ci_low", "ci_high", "n"])
        for scope, groups in curves.items():
            for label, c in groups.items():
                for i in range(len(c.mean)):
                    w.writerow([scope, label, i, repr(float(c.mean[i])), repr(float(c.ci_low[i])),
                                repr(float(c.ci_high[i])), c.n])
