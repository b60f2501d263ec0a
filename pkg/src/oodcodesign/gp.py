"""Exact Gaussian-process regression with a squared-exponential kernel.

Hyperparameters are fixed, not fitted: length scale 0.2 per normalised
input dimension, signal variance equal to the sample variance of the
targets, noise variance 1e-4. The prior mean is the sample mean of the
targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

MAX_JITTER = 1e-4
CLAMP_TOL = 1e-9


class GPNumericalError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    length_scale: float | tuple = 0.2
    signal_variance: float | None = None    # None: sample variance of targets
    noise_variance: float = 1e-4


def sq_exp_kernel(xa, xb, length_scale, signal_variance):
    ls = np.asarray(length_scale, dtype=float)
    a = np.asarray(xa, dtype=float) / ls
    b = np.asarray(xb, dtype=float) / ls
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2 * a @ b.T
    return signal_variance * np.exp(-0.5 * np.maximum(sq, 0.0))


class GaussianProcessSurrogate(RegressorMixin, BaseEstimator):
    """GP regressor over inputs in the unit box.

    Parameters
    ----------
    length_scale : float or sequence of float
    signal_variance : float or None
        Kernel amplitude; ``None`` uses the target sample variance (1.0 when
        that is zero, e.g. for a single point).
    noise_variance : float
    """

    def __init__(self, length_scale=0.2, signal_variance=None, noise_variance=1e-4):
        self.length_scale = length_scale
        self.signal_variance = signal_variance
        self.noise_variance = noise_variance

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if np.any(X < -1e-12) or np.any(X > 1 + 1e-12):
            raise ValueError("GP inputs must be normalised to [0, 1]")
        self.X_train_ = X
        self.y_mean_ = float(y.mean())
        if self.signal_variance is None:
            var = float(y.var())
            self.signal_variance_ = var if var > 0 else 1.0
        else:
            self.signal_variance_ = float(self.signal_variance)
        K = sq_exp_kernel(X, X, self.length_scale, self.signal_variance_)
        K[np.diag_indices_from(K)] += self.noise_variance
        self.jitter_ = 0.0
        jitter = 0.0
        while True:
            try:
                L = cholesky(K + jitter * np.eye(len(X)), lower=True)
                break
            except np.linalg.LinAlgError:
                jitter = 1e-10 if jitter == 0 else jitter * 10
                if jitter > MAX_JITTER:
                    raise GPNumericalError(
                        f"kernel matrix not positive definite with jitter up to {MAX_JITTER}")
        self.jitter_ = jitter
        self.L_ = L
        self.alpha_ = cho_solve((L, True), y - self.y_mean_)
        return self

    def predict(self, X, return_var=False):
        check_is_fitted(self, "alpha_")
        X = check_array(X)
        Ks = sq_exp_kernel(X, self.X_train_, self.length_scale, self.signal_variance_)
        mean = self.y_mean_ + Ks @ self.alpha_
        if not return_var:
            return mean
        v = cho_solve((self.L_, True), Ks.T)
        var = self.signal_variance_ - np.einsum("ij,ji->i", Ks, v)
        scale = max(self.signal_variance_, 1.0)
        if np.any(var < -CLAMP_TOL * scale):
            raise GPNumericalError(f"negative posterior variance {var.min()}")
        return mean, np.maximum(var, 0.0)


def gp_fit(xs, ys, kernel: KernelSpec = KernelSpec()) -> GaussianProcessSurrogate:
    return GaussianProcessSurrogate(kernel.length_scale, kernel.signal_variance,
                                    kernel.noise_variance).fit(np.atleast_2d(xs), ys)


def gp_predict(model: GaussianProcessSurrogate, x) -> tuple[float, float]:
    mean, var = model.predict(np.atleast_2d(x), return_var=True)
    return float(mean[0]), float(var[0])
