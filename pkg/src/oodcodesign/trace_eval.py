"""Per-sample traces, modified FP/FN rates and threshold sweeps.

A trace holds, for every test sample, the ground truth, the post-inference
scores of both components and their response times. Because scores do not
depend on the decision thresholds, the risk at any threshold pair can be
recomputed from one trace without re-running inference.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from . import risk as rk
from .risk import EventProbabilities, JointOutcomeDistribution, Severities
from .timing import DeadlineConfig, simulate_periods

TRACE_COLUMNS = ("has_object", "is_ood", "ec_score", "ood_score", "ec_time_ms", "ood_time_ms")
DEFAULT_MAX_LEVELS = 512
TIE_TOL = 1e-12


@dataclass(frozen=True)
class SampleRecord:
    has_object: bool
    is_ood: bool
    ec_score: float
    ood_score: float
    ec_time: float
    ood_time: float


@dataclass
class Trace:
    """Column-oriented trace. Use :meth:`from_records` for row input."""

    has_object: np.ndarray
    is_ood: np.ndarray
    ec_score: np.ndarray
    ood_score: np.ndarray
    ec_time: np.ndarray
    ood_time: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.has_object = np.asarray(self.has_object, dtype=bool)
        self.is_ood = np.asarray(self.is_ood, dtype=bool)
        self.ec_score = np.asarray(self.ec_score, dtype=float)
        self.ood_score = np.asarray(self.ood_score, dtype=float)
        self.ec_time = np.asarray(self.ec_time, dtype=float)
        self.ood_time = np.asarray(self.ood_time, dtype=float)
        n = self.has_object.shape
        cols = (self.is_ood, self.ec_score, self.ood_score, self.ec_time, self.ood_time)
        if any(c.shape != n for c in cols) or len(n) != 1:
            raise ValueError("trace columns must be 1-D and of equal length")
        for name in ("ec_score", "ood_score"):
            s = getattr(self, name)
            if np.any(~(s >= 0) | ~(s <= 1)):
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("ec_time", "ood_time"):
            t = getattr(self, name)
            if np.any(~np.isfinite(t) | (t <= 0)):
                raise ValueError(f"{name} must be strictly positive and finite")

    def __len__(self):
        return self.has_object.shape[0]

    @classmethod
    def from_records(cls, records, meta=None):
        records = list(records)
        return cls(
            [r.has_object for r in records], [r.is_ood for r in records],
            [r.ec_score for r in records], [r.ood_score for r in records],
            [r.ec_time for r in records], [r.ood_time for r in records],
            meta=dict(meta or {}))

    def records(self):
        for i in range(len(self)):
            yield SampleRecord(bool(self.has_object[i]), bool(self.is_ood[i]),
                               float(self.ec_score[i]), float(self.ood_score[i]),
                               float(self.ec_time[i]), float(self.ood_time[i]))


def _check_nonempty(trace: Trace):
    if len(trace) == 0:
        raise ValueError("trace is empty")


def write_trace_csv(trace: Trace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in trace.records():
            w.writerow([int(r.has_object), int(r.is_ood), repr(r.ec_score),
                        repr(r.ood_score), repr(r.ec_time), repr(r.ood_time)])


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true"):
        return True
    if t in ("0", "false"):
        return False
    raise ValueError(f"cannot parse boolean {text!r}")


def read_trace_csv(path, meta=None) -> Trace:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(
                f"{path}: expected header {','.join(TRACE_COLUMNS)}, got {reader.fieldnames}")
        rows = list(reader)
    cols = {c: [] for c in TRACE_COLUMNS}
    for lineno, row in enumerate(rows, start=2):
        try:
            cols["has_object"].append(_parse_bool(row["has_object"]))
            cols["is_ood"].append(_parse_bool(row["is_ood"]))
            for c in TRACE_COLUMNS[2:]:
                cols[c].append(float(row[c]))
        except (ValueError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    meta = dict(meta or {})
    meta.setdefault("source", str(Path(path)))
    return Trace(cols["has_object"], cols["is_ood"], cols["ec_score"], cols["ood_score"],
                 cols["ec_time_ms"], cols["ood_time_ms"], meta=meta)


def fp_m(trace: Trace, tau_ec: float) -> float:
    """Share of the whole trace where the EC fires on a sample with no object."""
    _check_nonempty(trace)
    hits = (trace.ec_score >= tau_ec) & ~trace.has_object
    return int(hits.sum()) / len(trace)


def fn_m(trace: Trace, tau_ec: float) -> float:
    """Share of the whole trace where the EC stays silent on a sample with an object."""
    _check_nonempty(trace)
    misses = (trace.ec_score < tau_ec) & trace.has_object
    return int(misses.sum()) / len(trace)


def deadline_outcomes(trace: Trace, d: DeadlineConfig, *, with_ood=True):
    """Per-sample ``(ood_miss, ec_miss, busy_ms)``; threshold independent."""
    t_ood = trace.ood_time if with_ood else np.zeros(len(trace))
    return simulate_periods(t_ood, trace.ec_time, d.period_ms)


def average_utilization(trace: Trace, d: DeadlineConfig, *, with_ood=True) -> float:
    _check_nonempty(trace)
    _, _, busy = deadline_outcomes(trace, d, with_ood=with_ood)
    return float(busy.mean() / d.period_ms)


def classify_outcomes(trace: Trace, thresholds, d: DeadlineConfig, timing=None):
    """Per-sample EC and OOD outcome indices (see :mod:`oodcodesign.risk`)."""
    tau_ec, tau_ood = thresholds
    ood_miss, ec_miss, _ = timing if timing is not None else deadline_outcomes(trace, d)
    pos = trace.has_object
    ec_fire = trace.ec_score >= tau_ec
    ec_out = np.select(
        [ec_miss, ec_fire & ~pos, ec_fire & pos, ~ec_fire & pos],
        [rk.E, rk.A, rk.B, rk.C], default=rk.D)
    ood_fire = trace.ood_score >= tau_ood
    ood = trace.is_ood
    ood_out = np.select(
        [ood_miss, ood_fire & ~ood, ood_fire & ood, ~ood_fire & ood],
        [rk.EPSILON, rk.ALPHA, rk.BETA, rk.GAMMA], default=rk.DELTA)
    return ec_out, ood_out


def empirical_joint(trace: Trace, thresholds, d: DeadlineConfig, timing=None):
    _check_nonempty(trace)
    ec_out, ood_out = classify_outcomes(trace, thresholds, d, timing)
    counts = np.zeros((5, 5, 2))
    np.add.at(counts, (ec_out, ood_out, trace.has_object.astype(int)), 1.0)
    return JointOutcomeDistribution(counts / len(trace))


def estimate_event_probs(trace: Trace, thresholds, d: DeadlineConfig,
                         timing=None) -> EventProbabilities:
    """Empirical marginals and conditionals of every fault-tree event."""
    return rk.marginalize(empirical_joint(trace, thresholds, d, timing))


def empirical_event_rates(trace: Trace, thresholds, d: DeadlineConfig,
                          timing=None) -> tuple[float, float]:
    """Direct per-sample frequencies of the two top events."""
    _check_nonempty(trace)
    ec_out, ood_out = classify_outcomes(trace, thresholds, d, timing)
    pos = trace.has_object
    ood_silent = np.isin(ood_out, (rk.GAMMA, rk.DELTA, rk.EPSILON))
    e0 = ood_silent & ((ec_out == rk.C) | ((ec_out == rk.E) & pos))
    e1 = (np.isin(ood_out, (rk.ALPHA, rk.BETA)) & ~pos) | (ec_out == rk.A)
    n = len(trace)
    return int(e0.sum()) / n, int(e1.sum()) / n


# --- sweeps -----------------------------------------------------------------


def default_threshold_levels(scores, max_levels: int = DEFAULT_MAX_LEVELS) -> np.ndarray:
    """Thresholds that realise every distinct decision on ``scores``.

    0, the midpoints between consecutive unique scores and (when the top
    score is below 1) a level above every score. Uniformly subsampled when
    more than ``max_levels`` result.
    """
    u = np.unique(np.asarray(scores, dtype=float))
    levels = [np.zeros(1), (u[:-1] + u[1:]) / 2]
    if u.size and u[-1] < 1:
        levels.append([(u[-1] + 1) / 2])
    levels = np.unique(np.concatenate(levels))
    if levels.size > max_levels:
        idx = np.unique(np.round(np.linspace(0, levels.size - 1, max_levels)).astype(int))
        levels = levels[idx]
    return levels


@dataclass(frozen=True)
class SweepGrid:
    """Threshold levels per axis; ``None`` selects the score-derived default."""

    tau_ec: tuple | None = None
    tau_ood: tuple | None = None
    max_levels: int = DEFAULT_MAX_LEVELS

    def levels(self, trace: Trace):
        ec = (np.asarray(self.tau_ec, dtype=float) if self.tau_ec is not None
              else default_threshold_levels(trace.ec_score, self.max_levels))
        ood = (np.asarray(self.tau_ood, dtype=float) if self.tau_ood is not None
               else default_threshold_levels(trace.ood_score, self.max_levels))
        if ec.size == 0 or ood.size == 0:
            raise ValueError("sweep grid is empty")
        return np.sort(ec), np.sort(ood)


@dataclass
class SweepResult:
    best_thresholds: tuple
    best_risk: float
    best_p_e0: float
    best_p_e1: float
    tau_ec: np.ndarray
    tau_ood: np.ndarray
    risk: np.ndarray          # shape (len(tau_ec), len(tau_ood)); one column in baseline mode
    p_e: float
    utilization: float

    @property
    def curve(self):
        return [((float(te), float(to)), float(self.risk[i, j]))
                for i, te in enumerate(self.tau_ec) for j, to in enumerate(self.tau_ood)]


def _count_ge(scores, mask, levels):
    s = np.sort(scores[mask])
    return s.size - np.searchsorted(s, levels, side="left")


def _pick_best(risk, tau_ec, tau_ood):
    best = risk.min()
    # ties: highest tau_ec, then highest tau_ood
    cand = np.argwhere(risk <= best + TIE_TOL)
    i, j = max(cand, key=lambda ij: (tau_ec[ij[0]], tau_ood[ij[1]]))
    return int(i), int(j)


def _ec_rates(trace, ec_miss, tau_ec):
    n = len(trace)
    pos = trace.has_object
    ok = ~ec_miss
    fires_neg = _count_ge(trace.ec_score, ok & ~pos, tau_ec)
    fires_pos = _count_ge(trace.ec_score, ok & pos, tau_ec)
    p_a = fires_neg / n
    p_c = (int((ok & pos).sum()) - fires_pos) / n
    return p_a, p_c


ESTIMATORS = ("direct", "closed_form")


def _bin(levels, scores):
    # number of levels <= score: the sample fires at level k iff k < bin
    return np.searchsorted(levels, scores, side="right")


def _joint_counts(trace, mask, tau_ec, tau_ood):
    """``(silent_silent, fire_fire)`` count matrices over the threshold grid."""
    ge, go = tau_ec.size + 1, tau_ood.size + 1
    bi = _bin(tau_ec, trace.ec_score[mask])
    bj = _bin(tau_ood, trace.ood_score[mask])
    h = np.bincount(bi * go + bj, minlength=ge * go).astype(np.int32).reshape(ge, go)
    silent = h.cumsum(axis=0, dtype=np.int32).cumsum(axis=1, dtype=np.int32)[:-1, :-1]
    total = bi.size
    # inclusion-exclusion keeps a single cumulative pass
    ec_silent = np.searchsorted(np.sort(bi), np.arange(1, ge), side="left")[:, None]
    ood_silent = np.searchsorted(np.sort(bj), np.arange(1, go), side="left")[None, :]
    fire = total - ec_silent - ood_silent + silent
    return silent, fire


def threshold_sweep(trace: Trace, d: DeadlineConfig, sev: Severities = Severities(),
                    grid: SweepGrid = SweepGrid(), estimator: str = "direct") -> SweepResult:
    """Risk of the monitored system at every threshold pair of ``grid``.

    ``estimator="direct"`` counts, per sample, whether either top event
    occurred. ``estimator="closed_form"`` plugs the empirical marginals and
    conditionals into the closed forms of :mod:`oodcodesign.risk`; it is
    biased once the EC misses deadlines (see ``oodcodesign oracle-check``).

    Deadline outcomes are computed once; every count is a 1-D or 2-D
    cumulative sum over the grid, so no per-point re-classification occurs.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")
    _check_nonempty(trace)
    tau_ec, tau_ood = grid.levels(trace)
    n = len(trace)
    ood_miss, ec_miss, busy = deadline_outcomes(trace, d)
    pos = trace.has_object
    ood = trace.is_ood
    n_e = int(ec_miss.sum())
    p_pos = int(pos.sum()) / n
    p_a, p_c = _ec_rates(trace, ec_miss, tau_ec)
    ok = ~ood_miss
    # alpha + beta, as counts
    fire = (_count_ge(trace.ood_score, ok & ~ood, tau_ood)
            + _count_ge(trace.ood_score, ok & ood, tau_ood))

    if estimator == "direct":
        # E0: EC false negative or (EC miss on a positive), OOD silent
        fn_silent, _ = _joint_counts(trace, ~ec_miss & pos, tau_ec, tau_ood)
        miss_pos = ec_miss & pos
        miss_pos_silent = int(miss_pos.sum()) - _count_ge(trace.ood_score, miss_pos & ok, tau_ood)
        e0 = (fn_silent + miss_pos_silent[None, :]) / n
        # E1: (OOD fires and no object) or EC false positive
        fire_neg = _count_ge(trace.ood_score, ok & ~pos, tau_ood)
        _, fp_fire = _joint_counts(trace, ~ec_miss & ~pos, tau_ec, tau_ood)
        e1 = (p_a[:, None] * n + fire_neg[None, :] - fp_fire) / n
    else:
        p_fire = fire / n
        p_silent = (n - fire) / n
        if n_e:
            n_pos = int(pos.sum())
            p_e_given_pos = int((ec_miss & pos).sum()) / n_pos
            em = ec_miss & ok
            fire_e = (_count_ge(trace.ood_score, em & ~ood, tau_ood)
                      + _count_ge(trace.ood_score, em & ood, tau_ood))
            fire_given_e = fire_e / n_e
            silent_given_e = (n_e - fire_e) / n_e
        else:
            p_e_given_pos = 0.0
            fire_given_e = np.zeros(tau_ood.size)
            silent_given_e = np.zeros(tau_ood.size)
        e0 = (p_c[:, None] * (p_silent - silent_given_e)[None, :]
              + p_pos * p_e_given_pos * silent_given_e[None, :])
        e1 = (p_a[:, None] + p_fire[None, :] * (1 - p_pos)
              - p_a[:, None] * (p_fire - fire_given_e)[None, :])
        e0 = np.clip(e0, 0.0, 1.0)
        e1 = np.clip(e1, 0.0, 1.0)

    risk = e0 * sev.s_e0 + e1 * sev.s_e1
    i, j = _pick_best(risk, tau_ec, tau_ood)
    return SweepResult(
        best_thresholds=(float(tau_ec[i]), float(tau_ood[j])),
        best_risk=float(risk[i, j]), best_p_e0=float(e0[i, j]), best_p_e1=float(e1[i, j]),
        tau_ec=tau_ec, tau_ood=tau_ood, risk=risk,
        p_e=n_e / n, utilization=float(busy.mean() / d.period_ms))


def baseline_threshold_sweep(trace: Trace, d: DeadlineConfig,
                             sev: Severities = Severities(),
                             grid: SweepGrid = SweepGrid()) -> SweepResult:
    """EC-only sweep; the OOD columns of ``trace`` are ignored."""
    _check_nonempty(trace)
    tau_ec, _ = grid.levels(trace)
    n = len(trace)
    _, ec_miss, busy = deadline_outcomes(trace, d, with_ood=False)
    p_a, p_c = _ec_rates(trace, ec_miss, tau_ec)
    p_e = int(ec_miss.sum()) / n
    e0 = p_c + p_e
    e1 = p_a
    risk = (e0 * sev.s_e0 + e1 * sev.s_e1)[:, None]
    i, _ = _pick_best(risk, tau_ec, np.zeros(1))
    return SweepResult(
        best_thresholds=(float(tau_ec[i]), math.nan),
        best_risk=float(risk[i, 0]), best_p_e0=float(e0[i]), best_p_e1=float(e1[i]),
        tau_ec=tau_ec, tau_ood=np.full(1, math.nan), risk=risk,
        p_e=p_e, utilization=float(busy.mean() / d.period_ms))


class ThresholdSelector(BaseEstimator):
    """Pick the risk-minimising decision thresholds for one trace.

    Parameters
    ----------
    period_ms : float
        Deadline, equal to the sampling period.
    s_e0, s_e1 : float
        Severities of missed hazards and of spurious actions.
    with_ood : bool
        Sweep both thresholds of the monitored system (True) or the EC
        threshold of the EC-only baseline (False).
    max_levels : int
        Cap on threshold levels per axis.
    estimator : {"direct", "closed_form"}
        Risk estimator used by the sweep of the monitored system.

    Attributes set by :meth:`fit`: ``thresholds_``, ``risk_``, ``sweep_``.
    """

    def __init__(self, period_ms=250.0, s_e0=3.0, s_e1=1.0, with_ood=True,
                 max_levels=DEFAULT_MAX_LEVELS, estimator="direct"):
        self.period_ms = period_ms
        self.s_e0 = s_e0
        self.s_e1 = s_e1
        self.with_ood = with_ood
        self.max_levels = max_levels
        self.estimator = estimator

    def fit(self, trace: Trace, y=None):
        args = (trace, DeadlineConfig(self.period_ms), Severities(self.s_e0, self.s_e1),
                SweepGrid(max_levels=self.max_levels))
        if self.with_ood:
            self.sweep_ = threshold_sweep(*args, estimator=self.estimator)
        else:
            self.sweep_ = baseline_threshold_sweep(*args)
        self.thresholds_ = self.sweep_.best_thresholds
        self.risk_ = self.sweep_.best_risk
        return self

    def predict(self, trace: Trace) -> np.ndarray:
        """System action per sample: 1 when either component fires in time."""
        if not hasattr(self, "thresholds_"):
            raise RuntimeError("ThresholdSelector is not fitted yet; call fit first")
        d = DeadlineConfig(self.period_ms)
        ood_miss, ec_miss, _ = deadline_outcomes(trace, d, with_ood=self.with_ood)
        tau_ec, tau_ood = self.thresholds_
        action = (trace.ec_score >= tau_ec) & ~ec_miss
        if self.with_ood:
            action |= (trace.ood_score >= tau_ood) & ~ood_miss
        return action.astype(int)
