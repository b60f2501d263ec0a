"""Event algebra for the EC / OOD-detector fault tree.

Outcomes of one input sample:

* EC: ``a`` false positive, ``b`` true positive, ``c`` false negative,
  ``d`` true negative, ``e`` deadline miss.
* OOD detector: ``alpha`` false positive, ``beta`` true positive,
  ``gamma`` false negative, ``delta`` true negative, ``epsilon`` deadline miss.
* ``pos``: the EC ground truth is 1 (a hazard is present).

The closed forms for the system with an OOD monitor are implemented exactly
as derived under the conditional-independence assumptions; they are exact
when the EC never misses its deadline and the OOD outcome is independent of
the EC outcome and of ``pos``. :func:`oracle_event_probs` enumerates the joint
outcome space and is exact for any joint.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

EC_OUTCOMES = ("a", "b", "c", "d", "e")
OOD_OUTCOMES = ("alpha", "beta", "gamma", "delta", "epsilon")

A, B, C, D, E = range(5)
ALPHA, BETA, GAMMA, DELTA, EPSILON = range(5)

SUM_TOL = 1e-9
JOINT_TOL = 1e-12


class InvalidProbabilities(ValueError):
    """Raised when a set of event probabilities violates its invariants."""


@dataclass(frozen=True)
class EventProbabilities:
    p_a: float
    p_b: float
    p_c: float
    p_d: float
    p_e: float
    p_alpha: float
    p_beta: float
    p_gamma: float
    p_delta: float
    p_epsilon: float
    p_alpha_given_e: float
    p_beta_given_e: float
    p_gamma_given_e: float
    p_delta_given_e: float
    p_epsilon_given_e: float
    p_pos: float
    p_e_given_pos: float

    def __post_init__(self):
        for f in fields(self):
            value = float(getattr(self, f.name))
            if not (-SUM_TOL <= value <= 1 + SUM_TOL):
                raise InvalidProbabilities(f"{f.name}={value} is outside [0, 1]")
            object.__setattr__(self, f.name, value)
        _check_sum("EC outcomes p_a+p_b+p_c+p_d+p_e", self.ec)
        _check_sum("OOD outcomes p_alpha+...+p_epsilon", self.ood)
        if self.p_e > 0 or any(self.ood_given_e):
            _check_sum("OOD outcomes given E_e", self.ood_given_e)
        if self.p_b + self.p_c > self.p_pos + SUM_TOL:
            raise InvalidProbabilities(
                f"p_b+p_c={self.p_b + self.p_c} exceeds p_pos={self.p_pos}")
        if self.p_a + self.p_d > 1 - self.p_pos + SUM_TOL:
            raise InvalidProbabilities(
                f"p_a+p_d={self.p_a + self.p_d} exceeds 1-p_pos={1 - self.p_pos}")

    @property
    def ec(self):
        return (self.p_a, self.p_b, self.p_c, self.p_d, self.p_e)

    @property
    def ood(self):
        return (self.p_alpha, self.p_beta, self.p_gamma, self.p_delta, self.p_epsilon)

    @property
    def ood_given_e(self):
        return (self.p_alpha_given_e, self.p_beta_given_e, self.p_gamma_given_e,
                self.p_delta_given_e, self.p_epsilon_given_e)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _check_sum(name, values):
    total = sum(values)
    if abs(total - 1.0) > SUM_TOL:
        raise InvalidProbabilities(f"{name} sum to {total!r}, expected 1")


@dataclass(frozen=True)
class Severities:
    s_e0: float = 3.0
    s_e1: float = 1.0

    def __post_init__(self):
        if self.s_e0 < 0 or self.s_e1 < 0:
            raise ValueError(f"severities must be nonnegative, got {self}")


@dataclass(frozen=True)
class RiskReport:
    p_e0: float
    p_e1: float
    risk: float


def baseline_failure_probs(ep: EventProbabilities) -> tuple[float, float]:
    """Top-event probabilities of the EC-only system: ``(P(E0), P(E1))``."""
    return ep.p_c + ep.p_e, ep.p_a


def _clamp(value: float):
    clamped = min(max(value, 0.0), 1.0)
    return clamped, clamped != value


def modified_failure_prob_e0(ep: EventProbabilities, *, return_flag=False):
    """P(no action while a hazard is present) with the OOD monitor in place.

    The first term covers an EC false negative the monitor fails to
    override, the second an EC deadline miss on a positive sample. Values
    outside [0, 1] are clamped; with ``return_flag`` a ``(value, clamped)``
    pair is returned.
    """
    override_fail = ep.p_gamma + ep.p_delta + ep.p_epsilon
    override_fail_given_e = ep.p_gamma_given_e + ep.p_delta_given_e + ep.p_epsilon_given_e
    raw = (ep.p_c * (override_fail - override_fail_given_e)
           + ep.p_pos * ep.p_e_given_pos * override_fail_given_e)
    value, flag = _clamp(raw)
    return (value, flag) if return_flag else value


def modified_failure_prob_e1(ep: EventProbabilities, *, return_flag=False):
    """P(action while no hazard is present) with the OOD monitor in place."""
    ood_fires = ep.p_alpha + ep.p_beta
    ood_fires_given_e = ep.p_alpha_given_e + ep.p_beta_given_e
    raw = (ep.p_a + ep.p_alpha * (1 - ep.p_pos) + ep.p_beta * (1 - ep.p_pos)
           - ep.p_a * (ood_fires - ood_fires_given_e))
    value, flag = _clamp(raw)
    return (value, flag) if return_flag else value


def total_risk(p_e0: float, p_e1: float, sev: Severities = Severities()) -> RiskReport:
    return RiskReport(p_e0, p_e1, p_e0 * sev.s_e0 + p_e1 * sev.s_e1)


def modified_risk(ep: EventProbabilities, sev: Severities = Severities()) -> RiskReport:
    return total_risk(modified_failure_prob_e0(ep), modified_failure_prob_e1(ep), sev)


def baseline_risk(ep: EventProbabilities, sev: Severities = Severities()) -> RiskReport:
    return total_risk(*baseline_failure_probs(ep), sev)


class JointOutcomeDistribution:
    """Dense pmf over (EC outcome, OOD outcome, pos), shape ``(5, 5, 2)``.

    Cells are indexed by the module constants, e.g. ``pmf[C, GAMMA, 1]``.
    The array is copied and frozen on construction.
    """

    def __init__(self, pmf):
        pmf = np.array(pmf, dtype=float)
        if pmf.shape != (5, 5, 2):
            raise InvalidProbabilities(f"joint pmf must have shape (5, 5, 2), got {pmf.shape}")
        if np.any(pmf < 0) or not np.all(np.isfinite(pmf)):
            raise InvalidProbabilities("joint pmf has negative or non-finite cells")
        total = pmf.sum()
        if abs(total - 1.0) > JOINT_TOL:
            raise InvalidProbabilities(f"joint pmf sums to {total!r}, expected 1")
        for ec, pos in ((A, 1), (B, 0), (C, 0), (D, 1)):
            if np.any(pmf[ec, :, pos] != 0):
                raise InvalidProbabilities(
                    f"structural zero violated: EC outcome {EC_OUTCOMES[ec]} with pos={pos}")
        if np.any(pmf[:E, EPSILON, :] != 0):
            raise InvalidProbabilities(
                "OOD deadline miss without EC deadline miss (shared-resource coupling)")
        pmf.setflags(write=False)
        self.pmf = pmf

    def __repr__(self):
        return f"JointOutcomeDistribution(nonzero_cells={int(np.count_nonzero(self.pmf))})"

    @classmethod
    def point_mass(cls, ec: str, ood: str, pos: int):
        pmf = np.zeros((5, 5, 2))
        pmf[EC_OUTCOMES.index(ec), OOD_OUTCOMES.index(ood), int(pos)] = 1.0
        return cls(pmf)

    @classmethod
    def from_counts(cls, counts):
        counts = np.asarray(counts, dtype=float)
        return cls(counts / counts.sum())


def allowed_cells() -> np.ndarray:
    """Boolean mask of cells that may carry mass."""
    mask = np.ones((5, 5, 2), dtype=bool)
    mask[A, :, 1] = mask[B, :, 0] = mask[C, :, 0] = mask[D, :, 1] = False
    mask[:E, EPSILON, :] = False
    return mask


def oracle_event_probs(joint: JointOutcomeDistribution) -> tuple[float, float]:
    """Exact ``(P(E0_mod), P(E1_mod))`` by summing cells of the joint."""
    pmf = joint.pmf
    p_e0 = 0.0
    p_e1 = 0.0
    for ec in range(5):
        for ood in range(5):
            for pos in (0, 1):
                mass = pmf[ec, ood, pos]
                if mass == 0:
                    continue
                ood_silent = ood in (GAMMA, DELTA, EPSILON)
                if ood_silent and (ec == C or (ec == E and pos == 1)):
                    p_e0 += mass
                if (ood in (ALPHA, BETA) and pos == 0) or ec == A:
                    p_e1 += mass
    return p_e0, p_e1


def oracle_baseline_probs(joint: JointOutcomeDistribution) -> tuple[float, float]:
    """Exact ``(P(E0_base), P(E1_base))`` over the EC-only event space."""
    ec = joint.pmf.sum(axis=(1, 2))
    return float(ec[C] + ec[E]), float(ec[A])


def marginalize(joint: JointOutcomeDistribution) -> EventProbabilities:
    pmf = joint.pmf
    ec = pmf.sum(axis=(1, 2))
    ood = pmf.sum(axis=(0, 2))
    p_e = ec[E]
    given_e = pmf[E].sum(axis=1) / p_e if p_e > 0 else np.zeros(5)
    p_pos = pmf[:, :, 1].sum()
    p_e_given_pos = pmf[E, :, 1].sum() / p_pos if p_pos > 0 else 0.0
    return EventProbabilities(
        *(float(v) for v in ec),
        *(float(v) for v in ood),
        *(float(v) for v in given_e),
        float(p_pos), float(p_e_given_pos))


def sample_joint(rng: np.random.Generator, *, with_miss: bool) -> JointOutcomeDistribution:
    """Draw a random joint that honours the model's assumptions.

    Functional EC and OOD outcomes are independent when nothing misses, and
    the OOD outcome does not depend on ``pos``. With ``with_miss=False`` the
    joint has no deadline-miss mass at all, the regime where the closed
    forms are exact.
    """
    p_pos = rng.uniform()
    ec_pos = rng.dirichlet(np.ones(2))        # (b, c) | pos
    ec_neg = rng.dirichlet(np.ones(2))        # (a, d) | not pos
    ood_func = rng.dirichlet(np.ones(4))      # (alpha..delta)
    pmf = np.zeros((5, 5, 2))
    if with_miss:
        miss_given_pos = rng.uniform(0, 0.5, size=2)   # index by pos
        ood_miss_given_e = rng.uniform()
        ood_given_e = rng.dirichlet(np.ones(4))
    else:
        miss_given_pos = np.zeros(2)
    for pos, p_label in ((0, 1 - p_pos), (1, p_pos)):
        ok = p_label * (1 - miss_given_pos[pos])
        func = ec_neg if pos == 0 else ec_pos
        cells = (A, D) if pos == 0 else (B, C)
        for w, ec in zip(func, cells):
            pmf[ec, :4, pos] = ok * w * ood_func
        if with_miss:
            miss = p_label * miss_given_pos[pos]
            pmf[E, :4, pos] = miss * (1 - ood_miss_given_e) * ood_given_e
            pmf[E, EPSILON, pos] = miss * ood_miss_given_e
    return JointOutcomeDistribution(pmf / pmf.sum())


def sample_unstructured_joint(rng: np.random.Generator) -> JointOutcomeDistribution:
    """Dirichlet draw over every allowed cell, no independence structure."""
    mask = allowed_cells()
    pmf = np.zeros((5, 5, 2))
    pmf[mask] = rng.dirichlet(np.ones(int(mask.sum())))
    return JointOutcomeDistribution(pmf / pmf.sum())
