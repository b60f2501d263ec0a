"""Sequential dispatch of the OOD detector and the EC on one blocking resource.

Both jobs are released at the start of each period and the deadline equals
the period. The OOD detector runs first; the EC starts when it finishes. Any
job still running at the deadline is terminated and its work discarded, so
the resource is never busy past the deadline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .seeding import make_rng

DEADLINE_PRESETS_MS = {3: 333.0, 4: 250.0, 5: 200.0}


@dataclass(frozen=True)
class DeadlineConfig:
    period_ms: float = 250.0

    def __post_init__(self):
        if not (self.period_ms > 0 and math.isfinite(self.period_ms)):
            raise ValueError(f"period_ms must be positive and finite, got {self.period_ms}")


@dataclass(frozen=True)
class PeriodOutcome:
    ood_miss: bool
    ec_miss: bool
    busy_ms: float


@dataclass(frozen=True)
class UtilizationReport:
    avg_utilization: float
    p_e: float
    p_epsilon: float
    p_e_given_pos: float


def simulate_period(t_ood: float, t_ec: float, period: float) -> PeriodOutcome:
    if not (t_ood > 0 and t_ec > 0 and period > 0):
        raise ValueError(
            f"response times and period must be positive, got {t_ood}, {t_ec}, {period}")
    ood_miss = t_ood > period
    ec_miss = t_ood + t_ec > period
    busy = period if ood_miss else min(t_ood + t_ec, period)
    return PeriodOutcome(bool(ood_miss), bool(ec_miss), float(busy))


def simulate_periods(t_ood, t_ec, period: float):
    """Vectorised :func:`simulate_period`.

    ``t_ood`` may be zero to model the EC running alone. Returns
    ``(ood_miss, ec_miss, busy_ms)`` arrays.
    """
    t_ood = np.asarray(t_ood, dtype=float)
    t_ec = np.asarray(t_ec, dtype=float)
    if period <= 0:
        raise ValueError(f"period must be positive, got {period}")
    if np.any(t_ood < 0) or np.any(t_ec <= 0):
        raise ValueError("response times must be positive")
    total = t_ood + t_ec
    ood_miss = t_ood > period
    ec_miss = total > period
    busy = np.minimum(total, period)
    return ood_miss, ec_miss, busy


@dataclass(frozen=True)
class DistributionSpec:
    """Response-time distribution in milliseconds.

    ``kind`` is one of ``constant`` (``value``), ``uniform`` (``low``,
    ``high``), ``lognormal`` (``median``, ``sigma``) or ``empirical``
    (``values``, resampled with replacement).
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        p = self.params
        if self.kind == "constant":
            ok = p["value"] > 0
        elif self.kind == "uniform":
            ok = 0 <= p["low"] < p["high"]
        elif self.kind == "lognormal":
            ok = p["median"] > 0 and p["sigma"] >= 0
        elif self.kind == "empirical":
            ok = len(p["values"]) > 0 and min(p["values"]) > 0
        else:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if not ok:
            raise ValueError(f"{self.kind} distribution needs strictly positive support: {p}")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        p = self.params
        if self.kind == "constant":
            return np.full(n, float(p["value"]))
        if self.kind == "uniform":
            return rng.uniform(p["low"], p["high"], size=n)
        if self.kind == "lognormal":
            return p["median"] * np.exp(p["sigma"] * rng.standard_normal(n))
        return rng.choice(np.asarray(p["values"], dtype=float), size=n)

    def to_dict(self):
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        return cls(d.pop("kind"), d)


@dataclass(frozen=True)
class ResponseTimeModel:
    """OOD time is label independent; EC time may depend on ``has_object``."""

    ood_dist: DistributionSpec
    ec_dist_pos: DistributionSpec
    ec_dist_neg: DistributionSpec


def estimate_timing(model: ResponseTimeModel, d: DeadlineConfig, p_pos: float,
                    n: int, seed: int) -> UtilizationReport:
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = make_rng(seed, "timing")
    pos = rng.uniform(size=n) < p_pos
    t_ood = model.ood_dist.sample(rng, n)
    t_ec = np.where(pos, model.ec_dist_pos.sample(rng, n), model.ec_dist_neg.sample(rng, n))
    ood_miss, ec_miss, busy = simulate_periods(t_ood, t_ec, d.period_ms)
    n_pos = int(pos.sum())
    return UtilizationReport(
        avg_utilization=float(busy.mean() / d.period_ms),
        p_e=float(ec_miss.mean()),
        p_epsilon=float(ood_miss.mean()),
        p_e_given_pos=float(ec_miss[pos].sum() / n_pos) if n_pos else 0.0,
    )
