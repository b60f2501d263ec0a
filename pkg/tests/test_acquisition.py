import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from oodcodesign.acquisition import cg_maximize, ei_function, expected_improvement
from oodcodesign.gp import gp_fit


def ei_quadrature(mean, var, best, xi):
    sd = np.sqrt(var)
    f = lambda y: (best - y - xi) * stats.norm.pdf(y, mean, sd)
    lo = min(mean - 12 * sd, best - xi)
    value, _ = integrate.quad(f, lo, best - xi, epsabs=1e-12, epsrel=1e-12, limit=200)
    return max(value, 0.0)


def test_trivial_cases():
    assert expected_improvement(1.0, 0.0, 1.0) == 0
    assert expected_improvement(0.0, 1e-20, 1.0) == pytest.approx(1.0)


def test_matches_quadrature(rng):
    for _ in range(100):
        mean, best = rng.normal(size=2)
        var = rng.uniform(1e-4, 2.0)
        xi = rng.uniform(0, 0.1)
        assert expected_improvement(mean, var, best, xi) == pytest.approx(
            ei_quadrature(mean, var, best, xi), abs=1e-6)


def test_negative_variance_rejected():
    with pytest.raises(ValueError):
        expected_improvement(0.0, -1.0, 0.0)


@settings(max_examples=300)
@given(st.floats(-1e3, 1e3), st.floats(0, 1e3), st.floats(-1e3, 1e3), st.floats(0, 10))
def test_nonnegative(mean, var, best, xi):
    ei = expected_improvement(mean, var, best, xi)
    assert ei >= 0
    if var == 0 and mean >= best - xi:
        assert ei == 0


def test_cg_on_quadratic():
    f = lambda X: -((np.atleast_2d(X) - [0.3, 0.8]) ** 2).sum(1)
    x, fx = cg_maximize(f, np.array([0.9, 0.1]))
    assert np.allclose(x, [0.3, 0.8], atol=1e-3)


def test_cg_respects_box():
    f = lambda X: np.atleast_2d(X).sum(1)
    x, fx = cg_maximize(f, np.array([0.5, 0.5]))
    assert np.allclose(x, [1, 1]) and fx == pytest.approx(2)


def test_cg_never_worse_than_start(rng):
    X = rng.uniform(size=(5, 2))
    f = ei_function(gp_fit(X, rng.normal(size=5)), 0.0, 0.0)
    for _ in range(20):
        x0 = rng.uniform(size=2)
        _, fx = cg_maximize(f, x0)
        assert fx >= f(x0[None, :])[0]
