"""Command-line entry point.

Every command takes ``--seed``; each draws its randomness from substreams
``derive_seed(seed, <command>, <purpose>)`` so commands never share streams
by accident. The baseline used by ``codesign`` and ``grid`` is the one the
``baseline`` command writes for the same seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import risk as rk
from .backend import Scenario, generate_trace
from .config import OPTIMIZER_KEYS, ConfigError, load_scenario
from .design import ARCHS, DesignPoint
from .optimizer import (STATUS_INFEASIBLE, GridSearch, OptimizerConfig, run_baseline,
                        run_codesign, write_history_csv)
from .seeding import MAX_SEED, derive_seed, make_rng
from .timing import DeadlineConfig
from .trace_eval import (SweepGrid, baseline_threshold_sweep, read_trace_csv,
                         threshold_sweep, write_trace_csv)

ORACLE_TOL = 1e-9
SURFACE_AXES = ("ec_size", "ood_size", "ec_threshold", "ood_threshold")
SURFACE_COLUMNS = ("ec_size", "ood_size", "ood_arch", "ec_threshold", "ood_threshold",
                   "risk", "p_e0", "p_e1", "p_e", "utilization")


class UsageError(Exception):
    pass


# --- shared plumbing ---------------------------------------------------------------


def _seed(text):
    v = int(text)
    if not 0 <= v <= MAX_SEED:
        raise argparse.ArgumentTypeError(f"seed must lie in [0, 2**64 - 1], got {v}")
    return v


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _f(x):
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def _scenario(args) -> tuple[Scenario, dict]:
    if args.config:
        sc, overrides = load_scenario(args.config)
    else:
        sc, overrides = Scenario(), {}
    if args.deadline_ms is not None:
        sc = sc.replace(period_ms=float(args.deadline_ms))
    return sc, overrides


def _optimizer_config(overrides, seed) -> OptimizerConfig:
    return OptimizerConfig(seed=seed, **{k: overrides[k] for k in OPTIMIZER_KEYS if k in overrides})


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, obj):
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        return v
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(clean(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def baseline_seed(seed):
    return derive_seed(seed, "baseline")


def _baseline(sc, seed):
    return run_baseline(sc, baseline_seed(seed))


# --- commands ----------------------------------------------------------------------


def cmd_baseline(args):
    sc, _ = _scenario(args)
    rec, u_base = _baseline(sc, args.seed)
    _write_json(_out(args) / "baseline.json",
                {"record": rec.to_dict(), "u_base": u_base, "seed": args.seed,
                 "scenario": sc.to_dict()})
    print(f"baseline risk {rec.risk:.4f} ec_size {rec.design.ec_size} "
          f"tau_ec {rec.design.ec_threshold:.4f} u_base {u_base:.4f}")
    return 0


def _report(sc, seed, out, base, u_base, best, history, status, command):
    write_history_csv(history, out / "history.csv")
    reduction = None if best is None else 1 - best.risk / base.risk if base.risk > 0 else 0.0
    _write_json(out / "best.json", {
        "command": command, "seed": seed, "status": status,
        "best": None if best is None else best.to_dict(),
        "baseline": {"record": base.to_dict(), "u_base": u_base},
        "reduction": reduction, "evaluations": len(history),
        "scenario": sc.to_dict(),
    })
    if best is None:
        print(f"risk Infeas. baseline {base.risk:.4f} u_base {u_base:.4f} status Infeas.")
    else:
        dp = best.design
        print(f"risk {best.risk:.4f} baseline {base.risk:.4f} reduction {reduction:.4f} "
              f"status {status}")
        print(f"ec_size {dp.ec_size} tau_ec {dp.ec_threshold:.4f} ood_size {dp.ood_size} "
              f"tau_ood {dp.ood_threshold:.4f} ood_arch {dp.ood_arch} "
              f"utilization {best.utilization:.4f} evaluations {len(history)}")


def cmd_codesign(args):
    sc, overrides = _scenario(args)
    base, u_base = _baseline(sc, args.seed)
    cfg = _optimizer_config(overrides, derive_seed(args.seed, "codesign"))
    res = run_codesign(sc, sc.space, cfg, u_base)
    _report(sc, args.seed, _out(args), base, u_base, res.best, res.history, res.status,
            "codesign")
    return 0


def cmd_grid(args):
    sc, overrides = _scenario(args)
    base, u_base = _baseline(sc, args.seed)
    gs = GridSearch(ec_step=args.ec_step, ood_step=args.ood_step,
                    max_evaluations=args.max_evaluations,
                    estimator=overrides.get("estimator", "direct"),
                    penalty_risk=overrides.get("penalty_risk"),
                    random_state=derive_seed(args.seed, "grid")).fit(sc, u_base)
    _report(sc, args.seed, _out(args), base, u_base, gs.best_, gs.history_, gs.status_, "grid")
    return 0


def _design_from_args(args, sc) -> DesignPoint:
    if (args.ood_size is None) != (args.ood_arch is None):
        raise UsageError("--ood-size and --ood-arch go together")
    dp = DesignPoint(args.ec_size, 0.5, args.ood_size,
                     0.5 if args.ood_size is not None else None, args.ood_arch)
    if not sc.space.contains(dp):
        raise UsageError(f"design {dp} lies outside the design space")
    return dp


def cmd_sweep(args):
    sc, overrides = _scenario(args)
    d = DeadlineConfig(sc.period_ms)
    estimator = overrides.get("estimator", "direct")
    if args.trace:
        trace = read_trace_csv(args.trace)
        with_ood = bool(np.any(trace.ood_score != 0))
    else:
        if args.ec_size is None:
            raise UsageError("give --ec-size (and optionally --ood-size/--ood-arch) or --trace")
        dp = _design_from_args(args, sc)
        trace = generate_trace(dp, sc, derive_seed(args.seed, "sweep", "train"))
        with_ood = dp.has_ood
    out = _out(args)
    if args.save_trace:
        write_trace_csv(trace, out / "trace.csv")
    grid = SweepGrid(max_levels=overrides.get("max_levels", 512))
    res = (threshold_sweep(trace, d, sc.severities, grid, estimator) if with_ood
           else baseline_threshold_sweep(trace, d, sc.severities, grid))
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("tau_ec", "tau_ood", "risk"))
        for (te, to), r in res.curve:
            w.writerow((_f(te), _f(to), _f(r)))
    te, to = res.best_thresholds
    print(f"best risk {res.best_risk:.4f} tau_ec {te:.4f} "
          f"tau_ood {'-' if math.isnan(to) else f'{to:.4f}'} "
          f"p_e {res.p_e:.4f} utilization {res.utilization:.4f}")
    return 0


def _axis_values(spec: str, name: str):
    try:
        lo, hi, step = (float(p) for p in spec.split(":"))
    except ValueError:
        raise UsageError(f"--{name} range must be LO:HI:STEP, got {spec!r}") from None
    if step <= 0 or hi < lo:
        raise UsageError(f"--{name} range must satisfy LO <= HI and STEP > 0")
    vals = lo + step * np.arange(int(math.floor((hi - lo) / step + 1e-9)) + 1)
    return vals


def cmd_surface(args):
    sc, overrides = _scenario(args)
    if args.x == args.y:
        raise UsageError("--x and --y must name different parameters")
    xs = _axis_values(args.x_range, "x-range")
    ys = _axis_values(args.y_range, "y-range")
    fixed = {"ec_size": args.ec_size, "ood_size": args.ood_size,
             "ec_threshold": args.ec_threshold, "ood_threshold": args.ood_threshold}
    for name in ("ec_size", "ood_size"):
        if fixed[name] is None and name not in (args.x, args.y):
            raise UsageError(f"--{name.replace('_', '-')} is required unless it is an axis")
    d = DeadlineConfig(sc.period_ms)
    # one training seed for the whole lattice: neighbouring points share samples
    train_seed = derive_seed(args.seed, "surface", "train")
    rows = []
    for xv in xs:
        for yv in ys:
            p = dict(fixed, **{args.x: xv, args.y: yv})
            ec, ood = int(round(p["ec_size"])), int(round(p["ood_size"]))
            dp = DesignPoint(ec, 0.5, ood, 0.5, args.ood_arch)
            if not sc.space.contains(dp):
                raise UsageError(f"lattice point {dp} lies outside the design space")
            grid = SweepGrid(
                None if p["ec_threshold"] is None else (float(p["ec_threshold"]),),
                None if p["ood_threshold"] is None else (float(p["ood_threshold"]),),
                overrides.get("max_levels", 512))
            res = threshold_sweep(generate_trace(dp, sc, train_seed), d, sc.severities, grid,
                                  overrides.get("estimator", "direct"))
            rows.append((ec, ood, args.ood_arch, *map(_f, res.best_thresholds),
                         _f(res.best_risk), _f(res.best_p_e0), _f(res.best_p_e1),
                         _f(res.p_e), _f(res.utilization)))
    with open(_out(args) / "surface.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SURFACE_COLUMNS)
        w.writerows(rows)
    print(f"surface {len(xs)}x{len(ys)} points written")
    return 0


def oracle_divergence(n_trials: int, seed: int) -> dict:
    """Closed form versus fault-tree enumeration on random valid joints."""
    report = {}
    for stratum, with_miss in (("zero-miss", False), ("with-miss", True)):
        rng = make_rng(seed, "oracle-check", stratum)
        err = np.empty((n_trials, 2))
        for k in range(n_trials):
            joint = rk.sample_joint(rng, with_miss=with_miss)
            ep = rk.marginalize(joint)
            o0, o1 = rk.oracle_event_probs(joint)
            err[k] = (abs(rk.modified_failure_prob_e0(ep) - o0),
                      abs(rk.modified_failure_prob_e1(ep) - o1))
        report[stratum] = {
            "trials": n_trials,
            "e0": {"max": float(err[:, 0].max()), "mean": float(err[:, 0].mean())},
            "e1": {"max": float(err[:, 1].max()), "mean": float(err[:, 1].mean())},
        }
    zm = report["zero-miss"]
    report["pass"] = bool(max(zm["e0"]["max"], zm["e1"]["max"]) <= ORACLE_TOL)
    report["tolerance"] = ORACLE_TOL
    return report


def cmd_oracle_check(args):
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    report = oracle_divergence(args.trials, args.seed)
    for stratum in ("zero-miss", "with-miss"):
        r = report[stratum]
        print(f"{stratum:9s} E0 max {r['e0']['max']:.3e} mean {r['e0']['mean']:.3e}  "
              f"E1 max {r['e1']['max']:.3e} mean {r['e1']['mean']:.3e}")
    if args.out:
        _write_json(_out(args) / "oracle_check.json", report)
    print("zero-miss stratum " + ("PASS" if report["pass"] else "FAIL")
          + f" (tolerance {ORACLE_TOL:g})")
    return 0 if report["pass"] else 1


# --- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON (defaults apply when omitted)")
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--deadline-ms", type=_positive, default=None,
                        help="override the scenario period (e.g. 333, 250, 200)")

    p = argparse.ArgumentParser(prog="oodcodesign",
                                description="Risk-aware co-design of a classifier and "
                                            "its OOD monitor on a synthetic backend.")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("baseline", parents=[common], help="EC-only dense search -> baseline.json")
    sub.add_parser("codesign", parents=[common],
                   help="partitioned Bayesian search -> history.csv, best.json")
    g = sub.add_parser("grid", parents=[common], help="raster grid search -> history.csv, best.json")
    g.add_argument("--ec-step", type=int, default=32)
    g.add_argument("--ood-step", type=int, default=8)
    g.add_argument("--max-evaluations", type=int, default=None)

    s = sub.add_parser("sweep", parents=[common], help="threshold sweep for one design -> sweep.csv")
    s.add_argument("--ec-size", type=int)
    s.add_argument("--ood-size", type=int)
    s.add_argument("--ood-arch", choices=ARCHS)
    s.add_argument("--trace", help="replay a trace CSV instead of generating one")
    s.add_argument("--save-trace", action="store_true", help="also write trace.csv")

    f = sub.add_parser("surface", parents=[common],
                       help="risk and event probabilities on a 2-D lattice -> surface.csv")
    f.add_argument("--x", choices=SURFACE_AXES, required=True)
    f.add_argument("--y", choices=SURFACE_AXES, required=True)
    f.add_argument("--x-range", required=True, metavar="LO:HI:STEP")
    f.add_argument("--y-range", required=True, metavar="LO:HI:STEP")
    f.add_argument("--ec-size", type=float)
    f.add_argument("--ood-size", type=float)
    f.add_argument("--ec-threshold", type=float, help="fix instead of minimising over it")
    f.add_argument("--ood-threshold", type=float, help="fix instead of minimising over it")
    f.add_argument("--ood-arch", choices=ARCHS, default="beta_vae")

    o = sub.add_parser("oracle-check", help="closed form vs enumeration divergence")
    o.add_argument("--trials", type=int, default=10000)
    o.add_argument("--seed", type=_seed, default=0)
    o.add_argument("--out", default=None)
    return p


COMMANDS = {"baseline": cmd_baseline, "codesign": cmd_codesign, "grid": cmd_grid,
            "sweep": cmd_sweep, "surface": cmd_surface, "oracle-check": cmd_oracle_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError, ValueError) as exc:
        print(f"oodcodesign {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
