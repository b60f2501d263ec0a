import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oodcodesign import risk as rk
from oodcodesign.risk import Severities
from oodcodesign.timing import DeadlineConfig
from oodcodesign.trace_eval import (SweepGrid, ThresholdSelector, Trace, baseline_threshold_sweep,
                                    default_threshold_levels, empirical_event_rates,
                                    estimate_event_probs, fn_m, fp_m, read_trace_csv,
                                    threshold_sweep, write_trace_csv)

from conftest import random_trace

D = DeadlineConfig(250.0)


def trace(pos, ood, ec, oo, t_ec=None, t_ood=None):
    n = len(pos)
    return Trace(pos, ood, ec, oo, t_ec if t_ec is not None else np.full(n, 10.0),
                 t_ood if t_ood is not None else np.full(n, 5.0))


def test_fp_fn_small_cases():
    t = trace([0, 0, 1, 1], [0] * 4, [0.9, 0.1, 0.8, 0.2], [0] * 4)
    assert fp_m(t, 0.5) == 0.25
    assert fn_m(t, 0.5) == 0.25
    assert fp_m(t, 1.0 + 1e-9) == 0
    assert fn_m(t, 0.0) == 0


def test_empty_trace_errors():
    t = trace([], [], [], [])
    for f in (lambda: fp_m(t, 0.5), lambda: fn_m(t, 0.5),
              lambda: estimate_event_probs(t, (0.5, 0.5), D)):
        with pytest.raises(ValueError):
            f()


def brute_rates(t, tau_ec, tau_ood):
    e0 = e1 = 0
    for r in t.records():
        ood_miss = r.ood_time > D.period_ms
        ec_miss = r.ood_time + r.ec_time > D.period_ms
        ec_fire = not ec_miss and r.ec_score >= tau_ec
        ood_fire = not ood_miss and r.ood_score >= tau_ood
        e0 += r.has_object and not ec_fire and not ood_fire
        e1 += (not r.has_object) and (ec_fire or ood_fire)
    return e0 / len(t), e1 / len(t)


def test_direct_rates_are_system_errors(rng):
    # E0 is "no action on a hazard", E1 "action without one", sample by sample
    for _ in range(30):
        t = random_trace(rng, 60)
        th = tuple(rng.uniform(size=2))
        assert empirical_event_rates(t, th, D) == pytest.approx(brute_rates(t, *th), abs=1e-15)


def test_ideal_components():
    t = trace([1, 1, 0, 0], [1, 0, 1, 0], [0.9, 0.9, 0.1, 0.1], [0.9, 0.1, 0.9, 0.1])
    e = estimate_event_probs(t, (0.5, 0.5), D)
    assert (e.p_e, e.p_epsilon, e.p_b, e.p_d) == (0, 0, 0.5, 0.5)
    assert empirical_event_rates(t, (0.5, 1.1), D) == (0, 0)


def test_total_overrun():
    t = trace([1, 0], [0, 0], [0.5, 0.5], [0.5, 0.5], t_ood=np.array([300.0, 300.0]))
    e = estimate_event_probs(t, (0.5, 0.5), D)
    assert e.p_e == 1 and e.p_epsilon == 1


def test_all_positive_silent():
    t = trace([1] * 5, [0] * 5, [0.3] * 5, [0.3] * 5)
    assert empirical_event_rates(t, (0.9, 0.9), D) == (1, 0)


def test_counting_matches_single_pass(rng):
    t = random_trace(rng, 300)
    e = estimate_event_probs(t, (0.4, 0.6), D)
    counts = np.zeros((5, 5, 2))
    for r in t.records():
        om = r.ood_time > 250
        em = r.ood_time + r.ec_time > 250
        fire = r.ec_score >= 0.4
        ec = rk.E if em else (rk.B if fire else rk.C) if r.has_object else (rk.A if fire else rk.D)
        of = r.ood_score >= 0.6
        oo = rk.EPSILON if om else (rk.BETA if of else rk.GAMMA) if r.is_ood else (
            rk.ALPHA if of else rk.DELTA)
        counts[ec, oo, int(r.has_object)] += 1
    ref = rk.marginalize(rk.JointOutcomeDistribution(counts / len(t)))
    for k, v in ref.as_dict().items():
        assert getattr(e, k) == pytest.approx(v, abs=1e-14), k


@pytest.mark.parametrize("estimator", ["direct", "closed_form"])
def test_sweep_matches_pointwise(rng, estimator):
    for _ in range(5):
        t = random_trace(rng, 120, tied=True)
        res = threshold_sweep(t, D, Severities(3, 1), estimator=estimator)
        for i, te in enumerate(res.tau_ec):
            for j, to in enumerate(res.tau_ood):
                if estimator == "direct":
                    p0, p1 = empirical_event_rates(t, (te, to), D)
                else:
                    r = rk.modified_risk(estimate_event_probs(t, (te, to), D))
                    p0, p1 = r.p_e0, r.p_e1
                assert res.risk[i, j] == pytest.approx(3 * p0 + p1, abs=1e-12)


def test_sweep_finds_zero_risk_pair():
    t = trace([1, 1, 0, 0], [1, 0, 1, 0], [0.1, 0.9, 0.2, 0.2], [0.9, 0.3, 0.1, 0.3])
    res = threshold_sweep(t, D)
    assert res.best_risk == 0
    assert empirical_event_rates(t, res.best_thresholds, D) == (0, 0)


def test_tie_break_prefers_higher_tau_ec():
    t = trace([0, 0], [0, 0], [0.2, 0.4], [0.0, 0.0])
    res = threshold_sweep(t, D, grid=SweepGrid((0.6, 0.8), (0.5,)))
    assert res.best_thresholds == (0.8, 0.5)


def test_dense_vs_exhaustive(rng):
    t = random_trace(rng, 80)
    full = threshold_sweep(t, D, grid=SweepGrid(max_levels=10_000))
    best = min(3 * a + b for a, b in (
        empirical_event_rates(t, (te, to), D)
        for te in np.append(np.unique(t.ec_score), 2.0)
        for to in np.append(np.unique(t.ood_score), 2.0)))
    assert full.best_risk == pytest.approx(best, abs=1e-9)


def test_levels_cap():
    lv = default_threshold_levels(np.linspace(0, 0.99, 5000), 64)
    assert lv.size <= 64 and lv[0] == 0


def test_empty_grid():
    t = trace([1], [0], [0.5], [0.5])
    with pytest.raises(ValueError, match="empty"):
        threshold_sweep(t, D, grid=SweepGrid((), (0.5,)))


def test_baseline_ignores_ood_columns(rng):
    t = random_trace(rng, 200)
    u = Trace(t.has_object, t.is_ood, t.ec_score, np.zeros(len(t)), t.ec_time,
              np.full(len(t), 1e-9))
    a = baseline_threshold_sweep(t, D)
    b = baseline_threshold_sweep(u, D)
    assert (a.best_risk, a.utilization) == (b.best_risk, b.utilization)


def test_csv_roundtrip(tmp_path, rng):
    t = random_trace(rng, 40)
    p = tmp_path / "t.csv"
    write_trace_csv(t, p)
    back = read_trace_csv(p)
    for col in ("has_object", "is_ood", "ec_score", "ood_score", "ec_time", "ood_time"):
        assert np.array_equal(getattr(back, col), getattr(t, col))
    write_trace_csv(back, tmp_path / "u.csv")
    assert p.read_bytes() == (tmp_path / "u.csv").read_bytes()


def test_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        read_trace_csv(p)
    p.write_text("has_object,is_ood,ec_score,ood_score,ec_time_ms,ood_time_ms\n1,0,0.5,x,1,1\n")
    with pytest.raises(ValueError, match=":2:"):
        read_trace_csv(p)


def test_selector_estimator_api(rng):
    t = random_trace(rng, 200)
    sel = ThresholdSelector(period_ms=250.0).fit(t)
    assert sel.get_params()["s_e0"] == 3.0
    action = sel.predict(t)
    pos = t.has_object
    assert np.mean(pos & (action == 0)) * 3 + np.mean(~pos & (action == 1)) == pytest.approx(
        sel.risk_, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 200))
def test_metrics_brute_force_and_monotone(seed, n):
    r = np.random.default_rng(seed)
    t = random_trace(r, n, tied=bool(seed % 2))
    taus = np.sort(r.uniform(size=6))
    fps = [fp_m(t, x) for x in taus]
    fns = [fn_m(t, x) for x in taus]
    for x, fp, fn in zip(taus, fps, fns):
        assert fp == sum((not s.has_object) and s.ec_score >= x for s in t.records()) / n
        assert fn == sum(s.has_object and s.ec_score < x for s in t.records()) / n
    assert all(a >= b for a, b in zip(fps, fps[1:]))
    assert all(a <= b for a, b in zip(fns, fns[1:]))
