"""Risk-aware co-design search.

The loop keeps one table of evaluated candidates. The numeric design space
(EC and OOD input sizes) is tiled into equal partitions; every partition
gets ``n_init`` uniformly sampled candidates, then each iteration fits one
GP surrogate per (partition, OOD architecture) on that partition's records,
maximises expected improvement with conjugate gradients, and evaluates the
winning proposal. Candidates whose average utilization exceeds the
baseline's are recorded with a penalty risk so the surrogate steers away.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .acquisition import ei_function, multistart_maximize, screened_starts
from .backend import Scenario, generate_trace
from .design import DesignPoint, DesignSpace, Partition
from .gp import GaussianProcessSurrogate, KernelSpec
from .seeding import check_seed, derive_seed, make_rng
from .timing import DeadlineConfig
from .trace_eval import (DEFAULT_MAX_LEVELS, ESTIMATORS, SweepGrid,
                         baseline_threshold_sweep, threshold_sweep)

HISTORY_COLUMNS = ("iteration", "partition", "ec_size", "ec_threshold", "ood_size",
                   "ood_threshold", "ood_arch", "risk", "p_e0", "p_e1", "utilization",
                   "feasible", "train_seed")
STATUS_OK = "ok"
STATUS_INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class EvaluationRecord:
    design: DesignPoint
    train_seed: int
    risk: float
    utilization: float
    feasible: bool
    p_e0: float
    p_e1: float
    partition_id: int = 0
    iteration: int = 0

    def row(self) -> dict:
        dp = self.design
        return {
            "iteration": self.iteration, "partition": self.partition_id,
            "ec_size": dp.ec_size, "ec_threshold": _fmt(dp.ec_threshold),
            "ood_size": "" if dp.ood_size is None else dp.ood_size,
            "ood_threshold": "" if not dp.has_ood else _fmt(dp.ood_threshold),
            "ood_arch": dp.ood_arch or "",
            "risk": _fmt(self.risk), "p_e0": _fmt(self.p_e0), "p_e1": _fmt(self.p_e1),
            "utilization": _fmt(self.utilization), "feasible": int(self.feasible),
            "train_seed": self.train_seed,
        }

    def to_dict(self) -> dict:
        dp = self.design
        return {
            "ec_size": dp.ec_size, "ec_threshold": dp.ec_threshold,
            "ood_size": dp.ood_size,
            "ood_threshold": dp.ood_threshold if dp.has_ood else None,
            "ood_arch": dp.ood_arch, "risk": self.risk, "p_e0": self.p_e0,
            "p_e1": self.p_e1, "utilization": self.utilization,
            "feasible": self.feasible, "train_seed": self.train_seed,
            "partition": self.partition_id, "iteration": self.iteration,
        }


def _fmt(x):
    return repr(float(x))


def write_history_csv(history, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=HISTORY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for rec in history:
            w.writerow(rec.row())


def read_history_csv(path) -> list[EvaluationRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            has_ood = row["ood_size"] != ""
            dp = DesignPoint(
                int(row["ec_size"]), float(row["ec_threshold"]),
                int(row["ood_size"]) if has_ood else None,
                float(row["ood_threshold"]) if has_ood else None,
                row["ood_arch"] or None)
            out.append(EvaluationRecord(
                dp, int(row["train_seed"]), float(row["risk"]), float(row["utilization"]),
                row["feasible"] == "1", float(row["p_e0"]), float(row["p_e1"]),
                int(row["partition"]), int(row["iteration"])))
    return out


@dataclass(frozen=True)
class OptimizerConfig:
    """Search settings; ``penalty_risk=None`` means ``10 * s_e0``."""

    n_init: int = 5
    penalty_risk: float | None = None
    patience: int = 10
    ei_xi: float = 0.0
    cg_restarts: int = 8
    cg_max_iter: int = 50
    max_iterations: int = 50
    max_levels: int = DEFAULT_MAX_LEVELS
    estimator: str = "direct"
    kernel: KernelSpec = KernelSpec()
    seed: int = 0

    def __post_init__(self):
        for name in ("n_init", "patience", "cg_restarts", "cg_max_iter",
                     "max_iterations", "max_levels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        check_seed(self.seed)

    def penalty_for(self, sc: Scenario) -> float:
        floor = 10 * sc.severities.s_e0
        if self.penalty_risk is None:
            return floor
        if self.penalty_risk < floor:
            raise ValueError(f"penalty_risk must be >= 10*s_e0 = {floor}")
        return float(self.penalty_risk)


# --- evaluation ---------------------------------------------------------------


def evaluate_candidate(dp: DesignPoint, sc: Scenario, u_base: float, seed: int,
                       cfg: OptimizerConfig = OptimizerConfig(), *, iteration=0,
                       partition_id=None) -> EvaluationRecord:
    """Train (synthetically), sweep thresholds, check utilization, record."""
    train_seed = derive_seed(seed, "train", dp.ec_size, dp.ood_size, dp.ood_arch)
    trace = generate_trace(dp, sc, train_seed)
    sweep = threshold_sweep(trace, DeadlineConfig(sc.period_ms), sc.severities,
                            SweepGrid(max_levels=cfg.max_levels), estimator=cfg.estimator)
    feasible = sweep.utilization <= u_base
    if partition_id is None:
        partition_id = sc.space.partition_of(dp.ec_size, dp.ood_size)
    return EvaluationRecord(
        design=dp.with_thresholds(*sweep.best_thresholds),
        train_seed=train_seed,
        risk=sweep.best_risk if feasible else cfg.penalty_for(sc),
        utilization=sweep.utilization, feasible=bool(feasible),
        p_e0=sweep.best_p_e0, p_e1=sweep.best_p_e1,
        partition_id=partition_id, iteration=iteration)


def _best_record(history):
    best = None
    for rec in history:
        if rec.feasible and (best is None or rec.risk < best.risk):
            best = rec          # strict: earliest wins ties
    return best


class BaselineSearch(BaseEstimator):
    """Dense search over EC size and threshold for the EC-only system.

    Attributes after :meth:`fit`: ``record_`` (minimum-risk record),
    ``u_base_`` (its average utilization) and ``history_``.
    """

    def __init__(self, size_step=16, max_levels=DEFAULT_MAX_LEVELS, random_state=0):
        self.size_step = size_step
        self.max_levels = max_levels
        self.random_state = random_state

    def fit(self, scenario: Scenario, y=None):
        lo, hi = scenario.space.ec_size_bounds
        sizes = np.arange(math.ceil(lo), math.floor(hi) + 1, self.size_step)
        d = DeadlineConfig(scenario.period_ms)
        history = []
        # one training seed for every size keeps the utilization curve smooth
        train_seed = derive_seed(self.random_state, "baseline-train")
        for i, s in enumerate(sizes):
            dp = DesignPoint(int(s), 0.5, None, None, None)
            sweep = baseline_threshold_sweep(generate_trace(dp, scenario, train_seed), d,
                                             scenario.severities,
                                             SweepGrid(max_levels=self.max_levels))
            history.append(EvaluationRecord(
                DesignPoint(int(s), sweep.best_thresholds[0], None, None, None),
                train_seed, sweep.best_risk, sweep.utilization, True,
                sweep.best_p_e0, sweep.best_p_e1, partition_id=0, iteration=i))
        self.history_ = history
        self.record_ = _best_record(history)
        self.u_base_ = self.record_.utilization
        return self


def run_baseline(sc: Scenario, seed: int = 0, size_step: int = 16):
    est = BaselineSearch(size_step=size_step, random_state=seed).fit(sc)
    return est.record_, est.u_base_


# --- acquisition -------------------------------------------------------------


def maximize_acquisition(models: dict, best: float, part: Partition, cfg: OptimizerConfig,
                         rng: np.random.Generator):
    """Propose ``(ec_size, ood_size, arch, ei)`` inside one partition.

    ``models`` maps each architecture to a fitted surrogate, or ``None`` when
    the partition has no record for it yet; such a level has infinite EI and
    is proposed at a uniformly random point.
    """
    for arch, model in models.items():
        if model is None:
            x = rng.uniform(size=2)
            return (*part.round_point(*part.denormalize(x)), arch, math.inf)
    winner = None
    for arch, model in models.items():
        f = ei_function(model, best, cfg.ei_xi)
        starts = screened_starts(f, rng, cfg.cg_restarts)
        x, val = multistart_maximize(f, starts, cfg.cg_max_iter)
        if winner is None or val > winner[2]:
            winner = (x, arch, val)
    x, arch, val = winner
    return (*part.round_point(*part.denormalize(x)), arch, val)


# --- co-design loop ------------------------------------------------------------


@dataclass
class CoDesignResult:
    best: EvaluationRecord | None
    history: list = field(default_factory=list)
    status: str = STATUS_OK
    iterations: int = 0


class CoDesignOptimizer(BaseEstimator):
    """Partitioned Bayesian optimisation of the monitored system.

    Parameters mirror :class:`OptimizerConfig`; ``random_state`` is the
    master seed from which every proposal and training seed is derived.

    Attributes after :meth:`fit`: ``best_`` (record or ``None``),
    ``history_``, ``status_`` (``"ok"`` or ``"infeasible"``),
    ``n_iterations_``.
    """

    def __init__(self, n_init=5, penalty_risk=None, patience=10, ei_xi=0.0, cg_restarts=8,
                 cg_max_iter=50, max_iterations=50, max_levels=DEFAULT_MAX_LEVELS,
                 estimator="direct", length_scale=0.2, noise_variance=1e-4,
                 random_state=0):
        self.n_init = n_init
        self.penalty_risk = penalty_risk
        self.patience = patience
        self.ei_xi = ei_xi
        self.cg_restarts = cg_restarts
        self.cg_max_iter = cg_max_iter
        self.max_iterations = max_iterations
        self.max_levels = max_levels
        self.estimator = estimator
        self.length_scale = length_scale
        self.noise_variance = noise_variance
        self.random_state = random_state

    def config(self) -> OptimizerConfig:
        return OptimizerConfig(
            n_init=self.n_init, penalty_risk=self.penalty_risk, patience=self.patience,
            ei_xi=self.ei_xi, cg_restarts=self.cg_restarts, cg_max_iter=self.cg_max_iter,
            max_iterations=self.max_iterations, max_levels=self.max_levels,
            estimator=self.estimator,
            kernel=KernelSpec(self.length_scale, None, self.noise_variance),
            seed=self.random_state)

    def fit(self, scenario: Scenario, u_base: float):
        res = run_codesign(scenario, scenario.space, self.config(), u_base)
        self.best_ = res.best
        self.history_ = res.history
        self.status_ = res.status
        self.n_iterations_ = res.iterations
        return self


def _fit_partition_models(part: Partition, records, space: DesignSpace, kernel: KernelSpec):
    models = {}
    for arch in space.arch_levels:
        recs = [r for r in records if r.design.ood_arch == arch]
        if not recs:
            models[arch] = None
            continue
        X = np.array([part.normalize(r.design.ec_size, r.design.ood_size) for r in recs])
        y = np.array([r.risk for r in recs])
        models[arch] = GaussianProcessSurrogate(
            kernel.length_scale, kernel.signal_variance, kernel.noise_variance).fit(X, y)
    return models


def run_codesign(sc: Scenario, space: DesignSpace, cfg: OptimizerConfig,
                 u_base: float) -> CoDesignResult:
    if not 0 < u_base <= 1:
        raise ValueError(f"u_base must lie in (0, 1], got {u_base}")
    if space is not sc.space:
        sc = sc.replace(space=space)
    seed = cfg.seed
    history: list[EvaluationRecord] = []

    def evaluate(ec, ood, arch, part, iteration, k):
        dp = DesignPoint(ec, 0.5, ood, 0.5, arch)
        return evaluate_candidate(
            dp, sc, u_base, derive_seed(seed, "eval", iteration, part.index, k), cfg,
            iteration=iteration, partition_id=part.index)

    for part in space.partitions:
        rng = make_rng(seed, "init", part.index)
        for k in range(cfg.n_init):
            ec, ood = part.round_point(*part.denormalize(rng.uniform(size=2)))
            arch = space.arch_levels[int(rng.integers(len(space.arch_levels)))]
            history.append(evaluate(ec, ood, arch, part, 0, k))

    best = _best_record(history)
    stale = 0
    iteration = 0
    while iteration < cfg.max_iterations and stale < cfg.patience:
        iteration += 1
        batch = []
        for part in space.partitions:
            recs = [r for r in history if r.partition_id == part.index]
            models = _fit_partition_models(part, recs, space, cfg.kernel)
            incumbent = min(r.risk for r in recs)
            rng = make_rng(seed, "acquire", iteration, part.index)
            ec, ood, arch, _ = maximize_acquisition(models, incumbent, part, cfg, rng)
            batch.append(evaluate(ec, ood, arch, part, iteration, 0))
        history.extend(batch)
        new_best = _best_record(history)
        if new_best is not None and (best is None or new_best.risk < best.risk):
            best = new_best
            stale = 0
        else:
            stale += 1

    status = STATUS_OK if best is not None else STATUS_INFEASIBLE
    return CoDesignResult(best, history, status, iteration)


# --- grid search -----------------------------------------------------------------


def _axis_sequence(start, lo, hi, step):
    """Lattice through ``start``: ascending from it, then wrapping to the bottom."""
    below = int((start - lo) // step)
    first = start - below * step
    values = list(range(first, int(math.floor(hi)) + 1, step))
    k = values.index(start)
    return values[k:] + values[:k]


class GridSearch(BaseEstimator):
    """Raster sweep of the lattice through a random start point.

    Increments default to 32 px for the EC and 8 px for the OOD detector;
    both architectures are swept, starting with a random one.
    """

    def __init__(self, ec_step=32, ood_step=8, max_evaluations=None, max_levels=DEFAULT_MAX_LEVELS,
                 estimator="direct", penalty_risk=None, random_state=0):
        self.ec_step = ec_step
        self.ood_step = ood_step
        self.max_evaluations = max_evaluations
        self.max_levels = max_levels
        self.estimator = estimator
        self.penalty_risk = penalty_risk
        self.random_state = random_state

    def visit_order(self, space: DesignSpace):
        rng = make_rng(self.random_state, "grid-start")
        (e0, e1), (o0, o1) = space.ec_size_bounds, space.ood_size_bounds
        ec_start = int(rng.integers(math.ceil(e0), math.floor(e1) + 1))
        ood_start = int(rng.integers(math.ceil(o0), math.floor(o1) + 1))
        a = int(rng.integers(len(space.arch_levels)))
        archs = space.arch_levels[a:] + space.arch_levels[:a]
        ecs = _axis_sequence(ec_start, e0, e1, self.ec_step)
        oods = _axis_sequence(ood_start, o0, o1, self.ood_step)
        return [(ec, ood, arch) for arch in archs for ec in ecs for ood in oods]

    def fit(self, scenario: Scenario, u_base: float):
        cfg = OptimizerConfig(penalty_risk=self.penalty_risk, max_levels=self.max_levels,
                              estimator=self.estimator, seed=self.random_state)
        order = self.visit_order(scenario.space)
        if self.max_evaluations is not None:
            order = order[:self.max_evaluations]
        history = []
        for i, (ec, ood, arch) in enumerate(order):
            dp = DesignPoint(ec, 0.5, ood, 0.5, arch)
            history.append(evaluate_candidate(
                dp, scenario, u_base, derive_seed(self.random_state, "grid-eval", i), cfg,
                iteration=i))
        self.history_ = history
        self.best_ = _best_record(history)
        self.status_ = STATUS_OK if self.best_ is not None else STATUS_INFEASIBLE
        return self


def run_grid_search(sc: Scenario, space: DesignSpace, u_base: float, seed: int = 0,
                    **kwargs) -> list[EvaluationRecord]:
    if space is not sc.space:
        sc = sc.replace(space=space)
    return GridSearch(random_state=seed, **kwargs).fit(sc, u_base).history_


def best_so_far(history) -> list[float]:
    """Running minimum of feasible risk (``inf`` until the first feasible record)."""
    out, best = [], math.inf
    for rec in history:
        if rec.feasible:
            best = min(best, rec.risk)
        out.append(best)
    return out
