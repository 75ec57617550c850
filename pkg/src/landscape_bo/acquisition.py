"""EI / PI acquisition functions and the seven-member schedule portfolio."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np
from scipy.special import erfc

from .rng import StreamKey, generator

_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


class AfKind(str, Enum):
    EI = "EI"
    PI = "PI"


def norm_cdf(z):
    return 0.5 * erfc(-np.asarray(z, dtype=float) / _SQRT2)


def norm_pdf(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        return _INV_SQRT2PI * np.exp(-0.5 * z * z)


def _check(*arrays):
    for a in arrays:
        if np.isnan(a).any():
            raise ValueError("NaN passed to acquisition function")


def expected_improvement(mu, sigma, f_min, xi=0.0):
    """Closed-form EI for minimisation; vectorised over ``mu``/``sigma``."""
    mu, sigma, f_min, xi = (np.asarray(v, dtype=float) for v in (mu, sigma, f_min, xi))
    _check(mu, sigma, f_min, xi)
    if (sigma < 0).any():
        raise ValueError("sigma must be non-negative")
    gain = f_min - mu - xi
    pos = sigma > 0
    s = np.where(pos, sigma, 1.0)
    with np.errstate(over="ignore"):
        z = gain / s
    ei = np.where(pos, gain * norm_cdf(z) + s * norm_pdf(z), np.maximum(gain, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def probability_of_improvement(mu, sigma, f_min, xi=0.0):
    mu, sigma, f_min, xi = (np.asarray(v, dtype=float) for v in (mu, sigma, f_min, xi))
    _check(mu, sigma, f_min, xi)
    if (sigma < 0).any():
        raise ValueError("sigma must be non-negative")
    gain = f_min - mu - xi
    pos = sigma > 0
    s = np.where(pos, sigma, 1.0)
    with np.errstate(over="ignore"):
        z = gain / s
    pi = np.where(pos, norm_cdf(z), (gain > 0).astype(float))
    return float(pi) if pi.ndim == 0 else pi


def acquisition(kind: AfKind, mu, sigma, f_min, xi=0.0):
    if AfKind(kind) is AfKind.EI:
        return expected_improvement(mu, sigma, f_min, xi)
    return probability_of_improvement(mu, sigma, f_min, xi)


# ---------------------------------------------------------------------------
# schedules

SCHEDULE_IDS = ("static_ei", "static_pi", "random", "round_robin", "ee25", "ee50", "ee75")


@dataclass(frozen=True)
class Schedule:
    schedule_id: str
    switch_fraction: Optional[float] = None

    def __post_init__(self):
        if self.schedule_id not in SCHEDULE_IDS:
            raise ValueError(f"unknown schedule {self.schedule_id!r}")

    def af(self, iteration: int, budget: int, key: StreamKey = ()) -> AfKind:
        return schedule_af(self, iteration, budget, key)

    def sequence(self, budget: int, key: StreamKey = ()) -> List[AfKind]:
        return [schedule_af(self, i, budget, key) for i in range(budget)]


_PORTFOLIO = (
    Schedule("static_ei"),
    Schedule("static_pi"),
    Schedule("random"),
    Schedule("round_robin"),
    Schedule("ee25", 0.25),
    Schedule("ee50", 0.50),
    Schedule("ee75", 0.75),
)


def portfolio() -> List[Schedule]:
    """The seven schedules in canonical order; this order indexes every target vector."""
    return list(_PORTFOLIO)


def get_schedule(schedule_id: str) -> Schedule:
    for s in _PORTFOLIO:
        if s.schedule_id == schedule_id:
            return s
    raise ValueError(f"unknown schedule {schedule_id!r}")


def switch_index(fraction: float, budget: int) -> int:
    # round first so 0.25 * 100 doesn't ceil to 26 through float noise
    return int(math.ceil(round(fraction * budget, 9)))


def schedule_af(s: Schedule, iteration: int, budget: int, key: StreamKey = ()) -> AfKind:
    if budget < 1:
        raise ValueError("budget must be positive")
    if not 0 <= iteration < budget:
        raise ValueError(f"iteration {iteration} outside [0, {budget})")
    sid = s.schedule_id
    if sid == "static_ei":
        return AfKind.EI
    if sid == "static_pi":
        return AfKind.PI
    if sid == "round_robin":
        return AfKind.EI if iteration % 2 == 0 else AfKind.PI
    if sid == "random":
        coins = generator(key).integers(0, 2, size=budget)
        return AfKind.EI if coins[iteration] == 0 else AfKind.PI
    return AfKind.EI if iteration < switch_index(s.switch_fraction, budget) else AfKind.PI
