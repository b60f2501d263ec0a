import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oodcodesign.timing import (DeadlineConfig, DistributionSpec, ResponseTimeModel,
                                estimate_timing, simulate_period, simulate_periods)


@pytest.mark.parametrize("t_ood,t_ec,expected", [
    (40, 200, (False, False, 240)),
    (40, 230, (False, True, 250)),
    (260, 10, (True, True, 250)),
])
def test_simulate_period_cases(t_ood, t_ec, expected):
    out = simulate_period(t_ood, t_ec, 250)
    assert (out.ood_miss, out.ec_miss, out.busy_ms) == expected


@pytest.mark.parametrize("args", [(0, 10, 250), (10, -1, 250), (10, 10, 0)])
def test_nonpositive_rejected(args):
    with pytest.raises(ValueError):
        simulate_period(*args)


def test_vectorised_matches_scalar(rng):
    t_ood = rng.uniform(1, 400, 500)
    t_ec = rng.uniform(1, 400, 500)
    om, em, busy = simulate_periods(t_ood, t_ec, 250)
    for i in range(500):
        o = simulate_period(t_ood[i], t_ec[i], 250)
        assert (om[i], em[i], busy[i]) == (o.ood_miss, o.ec_miss, o.busy_ms)


def const(v):
    return DistributionSpec("constant", {"value": v})


def test_constant_times_report():
    m = ResponseTimeModel(const(40), const(200), const(200))
    rep = estimate_timing(m, DeadlineConfig(250), 0.5, 1000, seed=3)
    assert rep.p_e == 0 and rep.p_epsilon == 0
    assert rep.avg_utilization == pytest.approx(0.96, abs=1e-15)


def test_uniform_overrun_probability():
    m = ResponseTimeModel(DistributionSpec("uniform", {"low": 0, "high": 500}),
                          const(1e-6), const(1e-6))
    rep = estimate_timing(m, DeadlineConfig(250), 0.5, 10_000, seed=11)
    assert abs(rep.p_epsilon - 0.5) <= 3 * np.sqrt(0.25 / 10_000)
    assert rep == estimate_timing(m, DeadlineConfig(250), 0.5, 10_000, seed=11)


def test_distribution_roundtrip():
    for spec in (const(3.0), DistributionSpec("lognormal", {"median": 20, "sigma": 0.1}),
                 DistributionSpec("empirical", {"values": [1.0, 2.0]})):
        assert DistributionSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError):
        DistributionSpec("gamma", {})
    with pytest.raises(ValueError):
        DistributionSpec("uniform", {"low": 5, "high": 1})


@settings(max_examples=300)
@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_overrun_coupling_and_busy_bounds(t_ood, t_ec, period):
    o = simulate_period(t_ood, t_ec, period)
    assert not o.ood_miss or o.ec_miss
    assert 0 < o.busy_ms <= period
