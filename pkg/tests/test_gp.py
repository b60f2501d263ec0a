import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oodcodesign.gp import GaussianProcessSurrogate, KernelSpec, gp_fit, gp_predict


def dense_posterior(X, y, Xs, ls, sv, noise):
    def k(a, b):
        d = a[:, None, :] - b[None, :, :]
        return sv * np.exp(-0.5 * (d ** 2).sum(-1) / ls ** 2)
    m = y.mean()
    K = k(X, X) + noise * np.eye(len(X))
    Kinv = np.linalg.inv(K)
    Ks = k(Xs, X)
    return m + Ks @ Kinv @ (y - m), sv - np.einsum("ij,jk,ik->i", Ks, Kinv, Ks)


def test_matches_dense_equations(rng):
    for _ in range(20):
        X = rng.uniform(size=(5, 2))
        y = rng.normal(size=5)
        Xs = rng.uniform(size=(50, 2))
        mean, var = GaussianProcessSurrogate().fit(X, y).predict(Xs, return_var=True)
        m_ref, v_ref = dense_posterior(X, y, Xs, 0.2, y.var(), 1e-4)
        assert np.max(np.abs(mean - m_ref)) <= 1e-8
        assert np.max(np.abs(var - v_ref)) <= 1e-8


def test_single_point():
    m, v = gp_predict(gp_fit([[0.3, 0.3]], [2.0]), [0.3, 0.3])
    assert m == pytest.approx(2.0, abs=1e-3)
    assert v == pytest.approx(1e-4, rel=0.01)


def test_duplicate_inputs_average():
    gp = gp_fit([[0.5, 0.5], [0.5, 0.5]], [0.0, 1.0], KernelSpec(noise_variance=0.1))
    m, _ = gp_predict(gp, [0.5, 0.5])
    assert 0 < m < 1


def test_prior_reversion():
    gp = gp_fit([[0.0, 0.0]], [1.0], KernelSpec(signal_variance=1.0))
    _, v = gp_predict(gp, [1.0, 1.0])
    assert v == pytest.approx(1.0, abs=1e-9)


def test_rejects_unnormalised_inputs():
    with pytest.raises(ValueError, match="normalised"):
        gp_fit([[2.0, 0.0]], [1.0])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_interpolates_with_tiny_noise(seed):
    r = np.random.default_rng(seed)
    X = r.uniform(size=(5, 2))
    y = r.normal(size=5)
    # the residual at a training input is noise * alpha; at 1e-8 it can
    # exceed 1e-6 when two inputs nearly coincide
    mean, var = gp_fit(X, y, KernelSpec(noise_variance=1e-10)).predict(X, return_var=True)
    assert np.max(np.abs(mean - y)) <= 1e-6
    assert np.all(var >= 0)
