import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oodcodesign import risk as rk
from oodcodesign.risk import (EventProbabilities, InvalidProbabilities, JointOutcomeDistribution,
                              Severities)


def ep(**kw):
    """EventProbabilities with unspecified EC/OOD mass parked on d / delta."""
    base = dict(p_a=0, p_b=0, p_c=0, p_d=0, p_e=0, p_alpha=0, p_beta=0, p_gamma=0,
                p_delta=0, p_epsilon=0, p_alpha_given_e=0, p_beta_given_e=0,
                p_gamma_given_e=0, p_delta_given_e=0, p_epsilon_given_e=0,
                p_pos=0, p_e_given_pos=0)
    base.update(kw)
    if "p_pos" not in kw:
        base["p_pos"] = base["p_b"] + base["p_c"]
    if "p_d" not in kw:
        base["p_d"] = 1 - sum(base[k] for k in ("p_a", "p_b", "p_c", "p_e"))
    if "p_delta" not in kw:
        base["p_delta"] = 1 - sum(base[k] for k in ("p_alpha", "p_beta", "p_gamma", "p_epsilon"))
    return EventProbabilities(**base)


def test_baseline_substitution():
    e = ep(p_a=0.05, p_b=0.3, p_c=0.05, p_e=0.05, p_d=0.55, p_pos=0.4, p_e_given_pos=0.05,
           p_delta_given_e=1.0)
    assert rk.baseline_failure_probs(e) == pytest.approx((0.10, 0.05), abs=1e-15)
    assert rk.baseline_failure_probs(ep()) == (0, 0)


def test_modified_e0_examples():
    e = ep(p_c=0.1, p_b=0.4, p_gamma=0.2, p_delta=0.3, p_epsilon=0.1, p_alpha=0.4)
    assert rk.modified_failure_prob_e0(e) == pytest.approx(0.06, abs=1e-15)
    e = ep(p_alpha=0.5, p_beta=0.5, p_b=0.5)
    assert rk.modified_failure_prob_e0(e) == 0


def test_modified_e1_examples():
    e = ep(p_a=0.05, p_b=0.4, p_alpha=0.10, p_beta=0.05, p_pos=0.4)
    assert rk.modified_failure_prob_e1(e) == pytest.approx(0.1325, abs=1e-15)
    assert rk.modified_failure_prob_e1(ep()) == 0


def test_total_risk():
    assert rk.total_risk(0.10, 0.05, Severities(3, 1)).risk == pytest.approx(0.35)
    assert rk.total_risk(0, 0, Severities(7, 2)).risk == 0


def test_table_anchor_split_exists():
    # a split of the combined optimum consistent with severities (3, 1)
    r = rk.total_risk(0.0468, 0.0700, Severities(3, 1))
    assert r.risk == pytest.approx(0.2104, abs=1e-12)


def test_clamp_flag():
    # out-of-model conditionals push the verbatim E0 form below zero
    e = ep(p_c=0.2, p_b=0.2, p_e=0.2, p_d=0.4, p_pos=0.4, p_e_given_pos=0.0,
           p_gamma=0.0, p_delta=0.0, p_alpha=1.0, p_gamma_given_e=1.0)
    value, clamped = rk.modified_failure_prob_e0(e, return_flag=True)
    assert clamped and value == 0.0


@pytest.mark.parametrize("field,bad", [("p_a", 0.5), ("p_alpha", 0.5)])
def test_sum_violation_names_the_sum(field, bad):
    e = ep().as_dict()
    e[field] = bad
    with pytest.raises(InvalidProbabilities, match="sum"):
        EventProbabilities(**e)


def test_structural_bound():
    with pytest.raises(InvalidProbabilities, match="p_pos"):
        ep(p_b=0.5, p_c=0.2, p_pos=0.5)


def test_point_masses():
    j = JointOutcomeDistribution.point_mass("c", "gamma", 1)
    assert rk.oracle_event_probs(j) == (1, 0)
    assert rk.modified_failure_prob_e0(rk.marginalize(j)) == 1
    j = JointOutcomeDistribution.point_mass("d", "delta", 0)
    assert rk.oracle_event_probs(j) == (0, 0)
    m = rk.marginalize(JointOutcomeDistribution.point_mass("e", "epsilon", 1))
    assert (m.p_e, m.p_epsilon, m.p_epsilon_given_e, m.p_pos) == (1, 1, 1, 1)


def test_forbidden_cells_rejected():
    pmf = np.zeros((5, 5, 2))
    pmf[rk.A, rk.DELTA, 1] = 1
    with pytest.raises(InvalidProbabilities, match="structural"):
        JointOutcomeDistribution(pmf)
    pmf = np.zeros((5, 5, 2))
    pmf[rk.B, rk.EPSILON, 1] = 1
    with pytest.raises(InvalidProbabilities, match="coupling"):
        JointOutcomeDistribution(pmf)


def test_uniform_allowed_hand_count():
    mask = rk.allowed_cells()
    j = JointOutcomeDistribution(mask / mask.sum())
    n = int(mask.sum())
    # hand count over the allowed cells
    e0 = e1 = 0
    for ec, ood, pos in itertools.product(range(5), range(5), range(2)):
        if not mask[ec, ood, pos]:
            continue
        silent = ood >= rk.GAMMA
        e0 += silent and (ec == rk.C or (ec == rk.E and pos == 1))
        e1 += (ood <= rk.BETA and pos == 0) or ec == rk.A
    assert n == 26
    assert rk.oracle_event_probs(j) == pytest.approx((e0 / n, e1 / n), abs=1e-15)


def test_no_miss_mass_gives_zero_conditionals(rng):
    m = rk.marginalize(rk.sample_joint(rng, with_miss=False))
    assert m.p_e == 0 and m.ood_given_e == (0, 0, 0, 0, 0)


def test_marginals_match_summation(rng):
    for _ in range(50):
        j = rk.sample_unstructured_joint(rng)
        m = rk.marginalize(j)
        pmf = j.pmf
        for k, name in enumerate(("p_a", "p_b", "p_c", "p_d", "p_e")):
            assert getattr(m, name) == pytest.approx(pmf[k].sum(), abs=1e-14)
        assert m.p_pos == pytest.approx(pmf[..., 1].sum(), abs=1e-14)
        assert m.p_epsilon_given_e == pytest.approx(
            pmf[rk.E, rk.EPSILON].sum() / pmf[rk.E].sum(), abs=1e-12)


def test_baseline_matches_oracle_on_arbitrary_joints(rng):
    for _ in range(200):
        j = rk.sample_unstructured_joint(rng)
        cf = rk.baseline_failure_probs(rk.marginalize(j))
        assert cf == pytest.approx(rk.oracle_baseline_probs(j), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_closed_forms_exact_without_misses(seed):
    j = rk.sample_joint(np.random.default_rng(seed), with_miss=False)
    e = rk.marginalize(j)
    o0, o1 = rk.oracle_event_probs(j)
    assert abs(rk.modified_failure_prob_e0(e) - o0) <= 1e-12
    assert abs(rk.modified_failure_prob_e1(e) - o1) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 10), st.floats(0, 10))
def test_risk_bounds(seed, s0, s1):
    j = rk.sample_joint(np.random.default_rng(seed), with_miss=True)
    r = rk.modified_risk(rk.marginalize(j), Severities(s0, s1))
    assert 0 <= r.p_e0 <= 1 and 0 <= r.p_e1 <= 1
    assert r.risk == pytest.approx(s0 * r.p_e0 + s1 * r.p_e1)
