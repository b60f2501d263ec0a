"""Synthetic evaluation backend.

Stands in for "train both networks at this design point and run them on the
test set": a design point and a training seed map deterministically to a
:class:`Trace`. Sample-level draws depend only on ``(master_seed,
train_seed)``, so traces for different design points share common random
numbers and the risk surface is smooth in the design for a fixed seed. The
training seed also jitters the accuracy curves, mimicking retrain variance.

Scores follow a Kumaraswamy law, a Beta-shaped family with a closed-form
quantile function, with its mean placed at ``0.5 +/- d/2`` for
discriminability ``d``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import betaln

from .design import DesignPoint, DesignSpace
from .risk import Severities
from .seeding import check_seed, make_rng
from .trace_eval import Trace

NULL_OOD_TIME_MS = 1e-9


@dataclass(frozen=True)
class BackendCoefficients:
    # functional performance
    score_shape: float = 2.0
    ec_d_max: float = 0.9
    ec_s_half: float = 60.0
    ec_ood_degradation: float = 0.9
    ec_ood_shift: float = 0.3
    vae_d_max: float = 0.95
    vae_s_half: float = 24.0
    rec_d_max: float = 0.97
    rec_s_half: float = 60.0
    sigma_train: float = 0.01
    # latency, milliseconds; medians c0 + c1*s^2 and k0 + k1*s^2
    ec_c0: float = 20.0
    ec_c1: float = 0.0012
    ec_c_pos: float = 0.1
    ec_sigma: float = 0.15
    ood_k0: float = 5.0
    ood_k1: float = 0.0011
    ood_k_rec: float = 1.8
    ood_sigma: float = 0.15

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"backend coefficient {f.name} must be finite and >= 0, got {v}")
        if self.ec_c0 <= 0 or self.ood_k0 <= 0:
            raise ValueError("latency intercepts ec_c0 and ood_k0 must be positive")
        if self.score_shape <= 0:
            raise ValueError("score_shape must be positive")
        if self.ood_k_rec < 1:
            raise ValueError("ood_k_rec must be >= 1 (the decoder pass only adds time)")

    def ec_discriminability(self, size):
        return self.ec_d_max * size / (size + self.ec_s_half)

    def ood_discriminability(self, size, arch):
        if arch == "beta_vae":
            return self.vae_d_max * size / (size + self.vae_s_half)
        return self.rec_d_max * size / (size + self.rec_s_half)

    def ec_median_ms(self, size, has_object=False):
        return (self.ec_c0 + self.ec_c1 * size**2) * (1 + self.ec_c_pos * has_object)

    def ood_median_ms(self, size, arch):
        k = self.ood_k_rec if arch == "reconstruction" else 1.0
        return (self.ood_k0 + self.ood_k1 * size**2) * k


@dataclass(frozen=True)
class Scenario:
    p_pos: float = 0.5
    ood_fraction: float = 0.3
    n_samples: int = 4000
    period_ms: float = 250.0
    severities: Severities = Severities()
    backend: BackendCoefficients = BackendCoefficients()
    master_seed: int = 0
    space: DesignSpace = field(default_factory=DesignSpace)

    def __post_init__(self):
        for name in ("p_pos", "ood_fraction"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.n_samples < 100:
            raise ValueError(f"n_samples must be at least 100, got {self.n_samples}")
        if not self.period_ms > 0:
            raise ValueError(f"period_ms must be positive, got {self.period_ms}")
        check_seed(self.master_seed)

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return {
            "p_pos": self.p_pos, "ood_fraction": self.ood_fraction,
            "n_samples": self.n_samples, "period_ms": self.period_ms,
            "severities": {"e0": self.severities.s_e0, "e1": self.severities.s_e1},
            "backend": asdict(self.backend), "master_seed": self.master_seed,
            "space": self.space.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        sev = d.get("severities", {})
        return cls(
            p_pos=float(d.get("p_pos", 0.5)),
            ood_fraction=float(d.get("ood_fraction", 0.3)),
            n_samples=int(d.get("n_samples", 4000)),
            period_ms=float(d.get("period_ms", 250.0)),
            severities=Severities(float(sev.get("e0", 3.0)), float(sev.get("e1", 1.0))),
            backend=BackendCoefficients(**{k: float(v) for k, v in d.get("backend", {}).items()}),
            master_seed=int(d.get("master_seed", 0)),
            space=DesignSpace.from_dict(d.get("space", {})),
        )


def _kumaraswamy_mean(a, b):
    return b * math.exp(betaln(1 + 1 / a, b))


@lru_cache(maxsize=4096)
def _kumaraswamy_b(a: float, mean: float) -> float:
    """Second shape parameter giving ``mean`` for first shape ``a``."""
    f = lambda log_b: _kumaraswamy_mean(a, math.exp(log_b)) - mean
    return math.exp(brentq(f, -30.0, 30.0, xtol=1e-13))


def _scores(u, mean, a):
    """Quantile transform of uniforms ``u``; ``mean`` takes few distinct values."""
    out = np.empty_like(u)
    for m in np.unique(mean):
        sel = mean == m
        b = _kumaraswamy_b(a, float(min(max(m, 1e-6), 1 - 1e-6)))
        out[sel] = (1 - (1 - u[sel]) ** (1 / b)) ** (1 / a)
    return out


def generate_trace(dp: DesignPoint, sc: Scenario, train_seed: int) -> Trace:
    """Deterministic trace for ``dp`` trained with ``train_seed``.

    Without an OOD detector in ``dp`` the trace carries a null detector
    (score 0, negligible time); the EC-only evaluation ignores those columns.
    """
    if not sc.space.contains(dp):
        raise ValueError(f"{dp} lies outside the design space {sc.space}")
    co = sc.backend
    jitter = make_rng(sc.master_seed, "train-jitter", train_seed).standard_normal(2)
    jitter *= co.sigma_train
    rng = make_rng(sc.master_seed, "trace", train_seed)
    n = sc.n_samples
    u = rng.uniform(size=(4, n))
    z = rng.standard_normal((2, n))
    pos = u[0] < sc.p_pos
    ood = u[1] < sc.ood_fraction

    d_ec = min(max(co.ec_discriminability(dp.ec_size) + jitter[0], 0.0), 1.0)
    d_ec = np.where(ood, d_ec * (1 - co.ec_ood_degradation), d_ec)
    # on OOD inputs the EC loses discriminability and confidence
    ec_mean = np.where(pos, 0.5 + d_ec / 2, 0.5 - d_ec / 2) - np.where(ood, co.ec_ood_shift, 0.0)
    ec_score = _scores(u[2], ec_mean, co.score_shape)
    ec_time = co.ec_median_ms(dp.ec_size, pos) * np.exp(co.ec_sigma * z[0])

    if dp.has_ood:
        d_ood = co.ood_discriminability(dp.ood_size, dp.ood_arch) + jitter[1]
        d_ood = min(max(d_ood, 0.0), 1.0)
        ood_score = _scores(u[3], np.where(ood, 0.5 + d_ood / 2, 0.5 - d_ood / 2),
                            co.score_shape)
        ood_time = co.ood_median_ms(dp.ood_size, dp.ood_arch) * np.exp(co.ood_sigma * z[1])
    else:
        ood_score = np.zeros(n)
        ood_time = np.full(n, NULL_OOD_TIME_MS)

    meta = {"seed": train_seed, "design": dp, "period_ms": sc.period_ms}
    return Trace(pos, ood, ec_score, ood_score, ec_time, ood_time, meta=meta)
