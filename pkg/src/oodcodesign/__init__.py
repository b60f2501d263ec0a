"""Risk-aware co-design of a learned classifier and its OOD safety monitor."""

from .backend import BackendCoefficients, Scenario, generate_trace
from .config import ConfigError, load_scenario
from .design import ARCHS, DesignPoint, DesignSpace, Partition
from .gp import GaussianProcessSurrogate, KernelSpec, gp_fit, gp_predict
from .acquisition import cg_maximize, expected_improvement
from .optimizer import (BaselineSearch, CoDesignOptimizer, CoDesignResult, EvaluationRecord,
                        GridSearch, OptimizerConfig, evaluate_candidate, maximize_acquisition,
                        run_baseline, run_codesign, run_grid_search)
from .risk import (EventProbabilities, JointOutcomeDistribution, Severities, baseline_risk,
                   modified_failure_prob_e0, modified_failure_prob_e1, modified_risk,
                   oracle_event_probs, total_risk)
from .seeding import derive_seed, make_rng
from .timing import DeadlineConfig, ResponseTimeModel, simulate_period, simulate_periods
from .trace_eval import (SweepGrid, SweepResult, ThresholdSelector, Trace, fn_m, fp_m,
                         read_trace_csv, threshold_sweep, write_trace_csv)

__version__ = "0.1.0"
