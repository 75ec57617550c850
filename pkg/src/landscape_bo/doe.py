"""Initial design: seeded Latin-hypercube sample evaluated on a problem."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np
from scipy.stats import qmc

from .bbob import LOWER, UPPER, Problem, evaluate_batch
from .rng import StreamKey, generator, make_key


@dataclass(frozen=True)
class Design:
    points: np.ndarray
    values: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if pts.ndim != 2 or vals.shape != (pts.shape[0],):
            raise ValueError("points must be (n, dim) and values (n,)")
        if len(vals) < 2:
            raise ValueError("a design needs at least 2 points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "points": self.points.tolist(),
            "values": self.values.tolist(),
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "Design":
        return cls(np.array(d["points"], dtype=float), np.array(d["values"], dtype=float),
                   dict(d.get("meta", {})))


def design_key(function_id: int, instance_id: int, seed: int) -> StreamKey:
    # no schedule component: every schedule of a (problem, seed) shares the design
    return make_key("doe", function_id, instance_id, seed)


def latin_hypercube(n: int, dim: int, key: StreamKey) -> np.ndarray:
    """``n`` points in ``[-5, 5]^dim``, one per equal-width stratum in every coordinate."""
    if n < 2:
        raise ValueError(f"design size must be >= 2, got {n}")
    sampler = qmc.LatinHypercube(d=dim, scramble=True, seed=generator(key))
    u = sampler.random(n)
    return LOWER + (UPPER - LOWER) * u


def sample_design(p: Problem, n: int, key: StreamKey, seed: int | None = None) -> Design:
    pts = latin_hypercube(n, p.dim, key)
    meta = {
        "function_id": p.function_id,
        "instance_id": p.instance_id,
        "dim": p.dim,
        "seed": seed,
        "size": n,
    }
    return Design(pts, evaluate_batch(p, pts), meta)
