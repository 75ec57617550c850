"""The BO loop: initial design, then one GP refit + acquisition step per evaluation."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from . import ela
from .acquisition import AfKind, Schedule, acquisition, get_schedule, schedule_af
from .bbob import Problem, evaluate_batch, instantiate, regret
from .doe import Design, design_key, sample_design
from .gp import GpConfig, GpModel, SurrogateError, fit
from .rng import StreamKey, child, generator, make_key

REGRET_FLOOR = 1e-12
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class BudgetConfig:
    doe_size: int
    surrogate_evals: int = 100

    def __post_init__(self):
        if self.doe_size < 2:
            raise ValueError("doe_size must be >= 2")
        if self.surrogate_evals < 1:
            raise ValueError("surrogate_evals must be >= 1")

    @classmethod
    def default(cls, dim: int) -> "BudgetConfig":
        return cls(doe_size=10 * dim, surrogate_evals=100)


@dataclass(frozen=True)
class AfOptimizerConfig:
    n_candidates: int = 1000
    n_local: int = 10
    local_steps: int = 20
    initial_step: float = 0.1  # fraction of the box width
    xi: float = 0.0

    @classmethod
    def from_dict(cls, d) -> "AfOptimizerConfig":
        return cls(**dict(d or {}))


@dataclass
class EvalRecord:
    iteration: int
    point: np.ndarray
    value: float
    af_kind: str
    fallback: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {"iteration": self.iteration, "point": np.asarray(self.point).tolist(),
                "value": self.value, "af_kind": self.af_kind, "fallback": self.fallback}

    @classmethod
    def from_dict(cls, d) -> "EvalRecord":
        return cls(int(d["iteration"]), np.array(d["point"], dtype=float), float(d["value"]),
                   str(d["af_kind"]), bool(d.get("fallback", False)))


@dataclass
class RunRecord:
    function_id: int
    instance_id: int
    dim: int
    seed: int
    schedule_id: str
    f_opt: float
    design: Design
    evals: List[EvalRecord]
    incumbent_regret: List[float]
    features: Optional[ela.FeatureVector] = None
    timing: Dict[str, float] = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)

    @property
    def key(self) -> Tuple[int, int, int, int, str]:
        return (self.function_id, self.instance_id, self.dim, self.seed, self.schedule_id)

    @property
    def problem_key(self) -> Tuple[int, int, int, int]:
        return (self.function_id, self.instance_id, self.dim, self.seed)

    @property
    def final_log_regret(self) -> float:
        return log_regret(self.incumbent_regret[-1])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "function_id": self.function_id,
            "instance_id": self.instance_id,
            "dim": self.dim,
            "seed": self.seed,
            "schedule_id": self.schedule_id,
            "f_opt": self.f_opt,
            "design": self.design.to_dict(),
            "evals": [e.to_dict() for e in self.evals],
            "incumbent_regret": list(self.incumbent_regret),
            "features": None if self.features is None else self.features.to_dict(),
            "final_log_regret": self.final_log_regret,
            "timing": dict(self.timing),
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "RunRecord":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported run record schema {d.get('schema_version')!r}")
        return cls(
            function_id=int(d["function_id"]),
            instance_id=int(d["instance_id"]),
            dim=int(d["dim"]),
            seed=int(d["seed"]),
            schedule_id=str(d["schedule_id"]),
            f_opt=float(d["f_opt"]),
            design=Design.from_dict(d["design"]),
            evals=[EvalRecord.from_dict(e) for e in d["evals"]],
            incumbent_regret=[float(v) for v in d["incumbent_regret"]],
            features=None if d.get("features") is None else ela.FeatureVector.from_dict(d["features"]),
            timing={k: float(v) for k, v in d.get("timing", {}).items()},
            flags=list(d.get("flags", [])),
        )


def log_regret(r: float) -> float:
    return math.log10(max(float(r), REGRET_FLOOR))


def run_key(p: Problem, seed: int, schedule_id: str) -> StreamKey:
    return make_key("run", p.function_id, p.instance_id, p.dim, seed, schedule_id)


def maximize_af(
    m: GpModel,
    kind: AfKind,
    f_min: float,
    bounds: np.ndarray,
    key: StreamKey,
    config: Optional[AfOptimizerConfig] = None,
) -> np.ndarray:
    """Random candidates followed by Gaussian-perturbation hill climbing from the best ones."""
    config = config or AfOptimizerConfig()
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    rng = generator(key)

    def score(X):
        mu, sd = m.predict_batch(X)
        return acquisition(kind, mu, sd, f_min, config.xi)

    cand = lo + (hi - lo) * rng.random((config.n_candidates, len(lo)))
    vals = score(cand)
    order = np.argsort(-vals, kind="stable")[: config.n_local]
    x = cand[order].copy()
    v = vals[order].copy()
    step = np.full(len(x), config.initial_step)
    for _ in range(config.local_steps):
        prop = np.clip(x + step[:, None] * (hi - lo) * rng.standard_normal(x.shape), lo, hi)
        pv = score(prop)
        better = pv > v
        x[better], v[better] = prop[better], pv[better]
        step[~better] *= 0.5
    return np.clip(x[int(np.argmax(v))], lo, hi)


def run(
    p: Problem,
    s: Schedule,
    b: BudgetConfig,
    seed: int,
    gp_config: Optional[GpConfig] = None,
    af_config: Optional[AfOptimizerConfig] = None,
    compute_features: bool = True,
) -> RunRecord:
    """One complete BO run. Bit-reproducible in ``(p, s, b, seed)`` and the configs."""
    if isinstance(s, str):
        s = get_schedule(s)
    t0 = time.perf_counter()
    bounds = p.bounds
    design = sample_design(p, b.doe_size, design_key(p.function_id, p.instance_id, seed), seed)
    t_doe = time.perf_counter()
    features = ela.feature_vector(design) if compute_features else None
    t_feat = time.perf_counter()

    base = run_key(p, seed, s.schedule_id)
    sched_key = child(base, "schedule")
    X = design.points.copy()
    y = design.values.copy()
    best = float(y.min())
    evals: List[EvalRecord] = []
    inc: List[float] = []
    flags: List[str] = []
    for i in range(b.surrogate_evals):
        kind = schedule_af(s, i, b.surrogate_evals, sched_key)
        fallback = False
        try:
            model = fit(X, y, gp_config, child(base, "gp", i), bounds)
            x_next = maximize_af(model, kind, best, bounds, child(base, "af", i), af_config)
        except SurrogateError:
            fallback = True
            fr = generator(child(base, "fallback", i))
            x_next = bounds[:, 0] + (bounds[:, 1] - bounds[:, 0]) * fr.random(p.dim)
            flags.append(f"surrogate_failure@{i}")
        y_next = float(evaluate_batch(p, x_next)[0])
        X = np.vstack([X, x_next])
        y = np.append(y, y_next)
        best = min(best, y_next)
        evals.append(EvalRecord(i, x_next, y_next, kind.value, fallback))
        inc.append(regret(p, best))
    t_end = time.perf_counter()

    return RunRecord(
        function_id=p.function_id,
        instance_id=p.instance_id,
        dim=p.dim,
        seed=int(seed),
        schedule_id=s.schedule_id,
        f_opt=p.f_opt,
        design=design,
        evals=evals,
        incumbent_regret=inc,
        features=features,
        timing={"doe": t_doe - t0, "features": t_feat - t_doe, "bo": t_end - t_feat},
        flags=flags,
    )


def incumbent_trajectory(r: RunRecord) -> List[Tuple[int, float]]:
    return [(i, log_regret(v)) for i, v in enumerate(r.incumbent_regret)]


def run_by_ids(
    function_id: int,
    instance_id: int,
    dim: int,
    schedule_id: str,
    seed: int,
    budget: Optional[BudgetConfig] = None,
    gp_config: Optional[GpConfig] = None,
    af_config: Optional[AfOptimizerConfig] = None,
) -> RunRecord:
    p = instantiate(function_id, instance_id, dim)
    return run(p, get_schedule(schedule_id), budget or BudgetConfig.default(dim), seed,
               gp_config, af_config)
