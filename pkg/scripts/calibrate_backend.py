"""Print the risk landscape of a synthetic scenario.

Shows the EC-only baseline, the dense-lattice optimum of the monitored
system at one training seed, the feasible share of the lattice and a coarse
risk map per OOD architecture. Used to pick the default backend
coefficients; rerun it after changing them.

    python3 scripts/calibrate_backend.py [--config scenario.json] [--train-seed 12345]
"""

import argparse
import math

from oodcodesign.backend import Scenario, generate_trace
from oodcodesign.config import load_scenario
from oodcodesign.design import DesignPoint
from oodcodesign.optimizer import run_baseline
from oodcodesign.timing import DeadlineConfig
from oodcodesign.trace_eval import threshold_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--train-seed", type=int, default=12345)
    ap.add_argument("--ec-step", type=int, default=16)
    ap.add_argument("--ood-step", type=int, default=8)
    args = ap.parse_args()
    sc = load_scenario(args.config)[0] if args.config else Scenario()
    d = DeadlineConfig(sc.period_ms)

    base, u_base = run_baseline(sc, seed=0)
    print(f"baseline: risk {base.risk:.4f} ec_size {base.design.ec_size} "
          f"P(E0) {base.p_e0:.4f} P(E1) {base.p_e1:.4f} u_base {u_base:.3f}")

    (e0, e1), (o0, o1) = sc.space.ec_size_bounds, sc.space.ood_size_bounds
    ecs = range(math.ceil(e0), math.floor(e1) + 1, args.ec_step)
    oods = range(math.ceil(o0), math.floor(o1) + 1, args.ood_step)
    risk = {}
    for arch in sc.space.arch_levels:
        for o in oods:
            for e in ecs:
                r = threshold_sweep(generate_trace(DesignPoint(e, 0.5, o, 0.5, arch), sc,
                                                   args.train_seed), d, sc.severities)
                risk[arch, o, e] = r.best_risk if r.utilization <= u_base else math.inf
    best = min(risk, key=risk.get)
    feasible = [v for v in risk.values() if math.isfinite(v)]
    near = sum(v <= 1.05 * risk[best] for v in feasible)
    print(f"optimum: risk {risk[best]:.4f} at {best}; reduction "
          f"{1 - risk[best] / base.risk:.3f}")
    print(f"feasible share {len(feasible) / len(risk):.3f}; within 5% of optimum: {near} points")
    for arch in sc.space.arch_levels:
        print(f"\n{arch}  (rows: OOD size, columns: EC size every {2 * args.ec_step} px)")
        for o in oods[::4]:
            cells = (risk[arch, o, e] for e in ecs[::2])
            print(f"{o:4d} " + " ".join(f"{v:.3f}" if math.isfinite(v) else "  -  " for v in cells))


if __name__ == "__main__":
    main()
