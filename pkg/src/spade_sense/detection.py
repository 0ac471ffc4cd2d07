"""Photon-count moments in the HG measurement basis."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError
from .optics import ModeBasis, OpticsParams, g_coeff_derivs, g_coeffs, overlap_p
from .source import SourceParams


@dataclass(frozen=True)
class CountModel:
    """Means and covariance of the per-shot mode counts.

    ``means`` covers every mode of the basis.  ``modes`` lists the populated
    ones (mean above ``min_mean``); ``covariance`` is restricted to them.
    """

    means: np.ndarray
    total: float
    g2: float
    modes: np.ndarray
    covariance: np.ndarray
    total_variance: float

    @property
    def populated_means(self) -> np.ndarray:
        return self.means[self.modes]


def _mode_weights(source: SourceParams, cutoff: int) -> np.ndarray:
    # cosh 2r - (-1)^m eta
    signs = np.where(np.arange(cutoff + 1) % 2 == 0, 1.0, -1.0)
    return math.cosh(2.0 * source.r) - signs * source.eta


def _check_d(d):
    if d < 0:
        raise ParameterError(f"separation must be non-negative, got {d!r}")


def mode_counts(source: SourceParams, optics: OpticsParams, d: float, basis: ModeBasis) -> np.ndarray:
    """Mean detected photons per shot in modes 0..basis.cutoff."""
    _check_d(d)
    gamma = d / (2.0 * optics.omega)
    return source.n_s * optics.kappa * _mode_weights(source, basis.cutoff) * g_coeffs(basis.cutoff, gamma) ** 2


def mode_count_derivs(source: SourceParams, optics: OpticsParams, d: float, basis: ModeBasis) -> np.ndarray:
    """d N_m / d d for m = 0..basis.cutoff."""
    _check_d(d)
    gamma = d / (2.0 * optics.omega)
    g = g_coeffs(basis.cutoff, gamma)
    dg = g_coeff_derivs(basis.cutoff, gamma)
    # dN/dd = n_s kappa w_m 2 G dG/dgamma * (1 / 2 omega)
    return source.n_s * optics.kappa * _mode_weights(source, basis.cutoff) * g * dg / optics.omega


def total_count(source: SourceParams, optics: OpticsParams, d: float) -> float:
    """Total mean detected photons over the complete basis, n_s kappa (cosh 2r - p eta)."""
    _check_d(d)
    return source.n_s * optics.kappa * (math.cosh(2.0 * source.r) - overlap_p(d, optics.omega) * source.eta)


def total_count_deriv(source: SourceParams, optics: OpticsParams, d: float) -> float:
    _check_d(d)
    p = overlap_p(d, optics.omega)
    return source.n_s * optics.kappa * source.eta * d * p / optics.omega**2


def total_variance(n_d, g2):
    """Variance of the total count, n_d [1 + (g2 - 1) n_d]."""
    if n_d < 0:
        raise ParameterError(f"n_d must be non-negative, got {n_d!r}")
    var = n_d * (1.0 + (g2 - 1.0) * n_d)
    if var < 0:
        raise DomainError(f"g2={g2} with N_D={n_d} gives negative total-count variance {var:.6g}")
    return var


def count_covariance(means, g2):
    """Count covariance diag(N) + (g2 - 1) N N^T."""
    means = np.asarray(means, dtype=float)
    if 1.0 + (g2 - 1.0) * means.sum() <= 0:
        raise DomainError(
            f"covariance is not positive definite: 1 + (g2 - 1) N_D = {1.0 + (g2 - 1.0) * means.sum():.6g}"
        )
    return np.diag(means) + (g2 - 1.0) * np.outer(means, means)


def inv_covariance(means, g2):
    """Inverse of :func:`count_covariance` via Sherman-Morrison."""
    means = np.asarray(means, dtype=float)
    if np.any(means <= 0):
        raise DomainError("inverse covariance needs strictly positive means; drop empty modes first")
    denom = 1.0 + (g2 - 1.0) * means.sum()
    if denom <= 0:
        raise DomainError(f"covariance is not positive definite: 1 + (g2 - 1) N_D = {denom:.6g}")
    return np.diag(1.0 / means) - (g2 - 1.0) / denom


def count_model(
    source: SourceParams,
    optics: OpticsParams,
    d: float,
    basis: ModeBasis | None = None,
    min_mean: float = 1e-15,
) -> CountModel:
    """Assemble the count moments at separation ``d``."""
    if basis is None:
        basis = ModeBasis.for_gamma(d / (2.0 * optics.omega))
    means = mode_counts(source, optics, d, basis)
    modes = np.flatnonzero(means > min_mean)
    total = float(means.sum())
    cov = count_covariance(means[modes], source.g2)
    return CountModel(
        means=means,
        total=total,
        g2=source.g2,
        modes=modes,
        covariance=cov,
        total_variance=total_variance(total, source.g2),
    )
