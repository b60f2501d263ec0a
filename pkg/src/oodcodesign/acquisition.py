"""Expected improvement and its maximisation by nonlinear conjugate gradients."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

FD_STEP = 1e-4
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def expected_improvement(mean, variance, best, xi=0.0):
    """E[max(best - Y - xi, 0)] for Y ~ Normal(mean, variance) (minimisation).

    Vectorised over ``mean`` and ``variance``.
    """
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < 0):
        raise ValueError("variance must be nonnegative")
    gain = best - mean - xi
    sd = np.sqrt(variance)
    # tiny sd overflows z * z; exp(-inf) = 0 is the right limit
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        z = np.where(sd > 0, gain / np.where(sd > 0, sd, 1.0), 0.0)
        ei = np.where(sd > 0,
                      gain * ndtr(z) + sd * _INV_SQRT_2PI * np.exp(-0.5 * z * z),
                      np.maximum(gain, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def ei_function(model, best, xi):
    """Vectorised EI over rows of normalised points for a fitted surrogate."""
    def f(X):
        mean, var = model.predict(np.atleast_2d(X), return_var=True)
        return expected_improvement(mean, var, best, xi)
    return f


def _fd_gradient(f, x, h=FD_STEP):
    d = x.size
    pts = np.repeat(x[None, :], 2 * d, axis=0)
    for k in range(d):
        pts[2 * k, k] += h
        pts[2 * k + 1, k] -= h
    pts = np.clip(pts, 0.0, 1.0)
    vals = f(pts)
    grad = np.empty(d)
    for k in range(d):
        span = pts[2 * k, k] - pts[2 * k + 1, k]
        grad[k] = (vals[2 * k] - vals[2 * k + 1]) / span if span > 0 else 0.0
    return grad


def cg_maximize(f, x0, max_iter=50, tol=1e-10):
    """Maximise ``f`` over the unit box from ``x0``.

    Polak-Ribiere+ conjugate directions on finite-difference gradients;
    iterates are projected back into the box by clamping. Each line search
    evaluates a geometric ladder of step lengths in one batch. Returns
    ``(x, f(x))``; the value never falls below ``f(x0)``.
    """
    x = np.clip(np.asarray(x0, dtype=float), 0.0, 1.0)
    fx = float(f(x[None, :])[0])
    g = _fd_gradient(f, x)
    direction = g.copy()
    steps = 2.0 ** -np.arange(0, 24)
    for _ in range(max_iter):
        norm = np.linalg.norm(direction)
        if norm == 0:
            break
        cands = np.clip(x[None, :] + (steps / norm)[:, None] * direction[None, :], 0.0, 1.0)
        vals = f(cands)
        k = int(np.argmax(vals))
        if vals[k] <= fx + tol:
            if np.allclose(direction, g):
                break
            direction = g.copy()      # restart along the gradient
            continue
        x_new, f_new = cands[k], float(vals[k])
        g_new = _fd_gradient(f, x_new)
        beta = max(0.0, float(g_new @ (g_new - g)) / max(float(g @ g), 1e-300))
        direction = g_new + beta * direction
        moved = np.linalg.norm(x_new - x)
        x, fx, g = x_new, f_new, g_new
        if moved < 1e-9:
            break
    return x, fx


def screened_starts(f, rng, n_starts, screen=32):
    """The ``n_starts`` best of ``n_starts * screen`` uniform points under ``f``."""
    cand = rng.uniform(size=(n_starts * screen, 2))
    vals = f(cand)
    return cand[np.argsort(-vals, kind="stable")[:n_starts]]


def multistart_maximize(f, starts, max_iter=50):
    """Best ``(x, f(x))`` of :func:`cg_maximize` over the rows of ``starts``."""
    best = None
    for x0 in np.atleast_2d(starts):
        x, val = cg_maximize(f, x0, max_iter=max_iter)
        if best is None or val > best[1]:
            best = (x, val)
    return best
