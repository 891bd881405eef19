"""Gaussian-process regression with a squared-exponential kernel, and
expected improvement for minimisation.

Hyperparameters are fixed by the caller; nothing here fits them.  The prior
mean is the mean of the training targets.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.special import erfc

from .errors import ConditioningError, InvalidSpecError

__all__ = ["GpHyper", "GpModel", "default_hyper", "fit_gp", "posterior",
           "posterior_batch", "expected_improvement", "normal_cdf", "normal_pdf"]

JITTER_START = 1e-10
JITTER_MAX = 1e-6


@dataclass(frozen=True)
class GpHyper:
    length_scale: float = 0.2
    signal_variance: float = 1.0
    noise_variance: float = 1e-6

    def __post_init__(self):
        if not (self.length_scale > 0 and self.signal_variance > 0 and self.noise_variance >= 0):
            raise InvalidSpecError(f"invalid GP hyperparameters {self}")


def default_hyper(values, length_scale: float = 0.2, noise_variance: float = 1e-6) -> GpHyper:
    """Length scale 0.2 on the unit cube, signal variance = target variance.

    A constant target vector has zero variance; the floor keeps the kernel
    positive definite and makes every expected improvement vanish.
    """
    var = float(np.var(np.asarray(values, dtype=np.float64))) if len(values) else 0.0
    return GpHyper(length_scale, max(var, 1e-12), noise_variance)


@dataclass(frozen=True)
class GpModel:
    inputs: np.ndarray
    targets: np.ndarray
    hyper: GpHyper
    prior_mean: float
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float


def _sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)


def kernel(a, b, hyper: GpHyper) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    return hyper.signal_variance * np.exp(-_sqdist(a, b) / (2.0 * hyper.length_scale ** 2))


def fit_gp(points, values, hyper: GpHyper) -> GpModel:
    """Factorise ``K + noise*I`` and solve for the weight vector.

    If the Cholesky factorisation fails, a diagonal jitter of
    ``1e-10 * signal_variance`` is added and grown tenfold up to
    ``1e-6 * signal_variance`` before giving up.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(values, dtype=np.float64).ravel()
    if x.shape[0] < 1 or x.shape[0] != y.size:
        raise InvalidSpecError("need at least one point and one value per point")
    prior = float(y.mean())
    k = kernel(x, x, hyper)
    k[np.diag_indices_from(k)] += hyper.noise_variance

    jitter = 0.0
    while True:
        try:
            kj = k.copy()
            kj[np.diag_indices_from(kj)] += jitter * hyper.signal_variance
            chol = cholesky(kj, lower=True, check_finite=False)
            break
        except np.linalg.LinAlgError:
            jitter = JITTER_START if jitter == 0.0 else jitter * 10.0
            if jitter > JITTER_MAX * (1 + 1e-9):
                raise ConditioningError(
                    f"kernel matrix not positive definite with jitter {JITTER_MAX}") from None
    alpha = cho_solve((chol, True), y - prior, check_finite=False)
    return GpModel(x, y, hyper, prior, chol, alpha, jitter)


def posterior_batch(model: GpModel, queries) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means and variances at each row of ``queries``."""
    q = np.asarray(queries, dtype=np.float64)
    if q.ndim == 1:
        q = q[:, None] if model.inputs.shape[1] == 1 else q[None, :]
    ks = kernel(model.inputs, q, model.hyper)
    mean = model.prior_mean + ks.T @ model.alpha
    v = solve_triangular(model.chol, ks, lower=True, check_finite=False)
    var = model.hyper.signal_variance - (v * v).sum(axis=0)
    return mean, np.maximum(var, 0.0)


def posterior(model: GpModel, x) -> tuple[float, float]:
    mean, var = posterior_batch(model, np.atleast_1d(np.asarray(x, dtype=np.float64))[None, :])
    return float(mean[0]), float(var[0])


def normal_cdf(z):
    return 0.5 * erfc(-np.asarray(z, dtype=np.float64) / np.sqrt(2.0))


def normal_pdf(z):
    z = np.asarray(z, dtype=np.float64)
    return np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)


def ei_from_moments(mean, std, best) -> np.ndarray:
    """Expected improvement below ``best`` for Gaussian predictions."""
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    gap = best - mean
    out = np.maximum(gap, 0.0)
    pos = std > 0
    # beyond |z| = 40 the density underflows and the cdf saturates
    z = np.clip(gap[pos] / std[pos], -40.0, 40.0)
    out[pos] = gap[pos] * normal_cdf(z) + std[pos] * normal_pdf(z)
    return np.maximum(out, 0.0)


def expected_improvement(model: GpModel, x, best_value: float):
    """EI at one point (scalar result) or at each row of a 2-D array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        mean, var = posterior_batch(model, x)
        return ei_from_moments(mean, np.sqrt(var), best_value)
    mean, var = posterior(model, x)
    return float(ei_from_moments(np.array([mean]), np.array([np.sqrt(var)]), best_value)[0])
