"""Moment-based separation estimator.

The estimator consumes sample-mean count vectors (one row per sample mean,
one column per HG mode 0..M) and maps them to separation estimates by the
generalized method of moments linearized at a reference separation d0:

    d_hat = d0 + (dN^T L^-1 dN)^-1 dN^T L^-1 (n_bar - N(d0))

with N the mean counts, dN their d-derivative and L the count covariance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted, validate_data

from .detection import inv_covariance, mode_count_derivs, mode_counts
from .errors import DegenerateEstimatorError, ParameterError
from .optics import ModeBasis, OpticsParams
from .source import SourceParams


@dataclass(frozen=True)
class LinearizedMoments:
    """Everything the one-step estimator needs at the reference point."""

    d0: float
    cutoff: int
    modes: np.ndarray
    means: np.ndarray
    gradient: np.ndarray
    weights: np.ndarray
    information: float

    def estimate(self, n_bar):
        """One-step estimate(s); ``n_bar`` has ``cutoff + 1`` trailing entries."""
        n_bar = np.asarray(n_bar, dtype=float)
        return self.d0 + (n_bar[..., self.modes] - self.means) @ self.weights


def linearize(
    source: SourceParams,
    optics: OpticsParams,
    d0: float,
    basis: ModeBasis | None = None,
    min_mean: float = 1e-15,
) -> LinearizedMoments:
    """Linearize the mode-count moments around ``d0``.

    Modes whose mean count is at most ``min_mean`` are dropped.
    """
    if basis is None:
        basis = ModeBasis.for_gamma(d0 / (2.0 * optics.omega))
    means = mode_counts(source, optics, d0, basis)
    modes = np.flatnonzero(means > min_mean)
    if modes.size == 0:
        raise DegenerateEstimatorError("no populated modes at the reference separation")
    means = means[modes]
    grad = mode_count_derivs(source, optics, d0, basis)[modes]
    lam_inv = inv_covariance(means, source.g2)
    proj = lam_inv @ grad
    info = float(grad @ proj)
    if not info > 0:
        raise DegenerateEstimatorError(
            f"mode counts carry no first-order information about d at d0={d0} (information {info:.3e})"
        )
    return LinearizedMoments(
        d0=float(d0),
        cutoff=basis.cutoff,
        modes=modes,
        means=means,
        gradient=grad,
        weights=proj / info,
        information=info,
    )


def refine_estimate(n_bar, lin: LinearizedMoments, source, optics, upper=None):
    """Solve dN^T L^-1 (n_bar - N(d)) = 0 for d on [0, upper] with Brent's method.

    Weights stay fixed at the reference point.  Without a sign change the
    bracket end with the smaller residual is returned.
    """
    basis = ModeBasis(lin.cutoff)
    if upper is None:
        upper = lin.d0 + 4.0 * optics.omega
    direction = lin.weights * lin.information
    n_bar = np.asarray(n_bar, dtype=float)[lin.modes]

    def residual(d):
        return float(direction @ (n_bar - mode_counts(source, optics, d, basis)[lin.modes]))

    lo, hi = residual(0.0), residual(upper)
    if lo == 0.0:
        return 0.0
    if lo * hi > 0:
        return 0.0 if abs(lo) < abs(hi) else float(upper)
    return float(brentq(residual, 0.0, upper, xtol=1e-14, rtol=1e-14))


class SeparationEstimator(BaseEstimator):
    """Method-of-moments separation estimator for HG-mode photon counting.

    Parameters
    ----------
    n_s, kappa, omega, r, theta, g2 : float
        Source and imaging parameters, all assumed known.
    d0 : float or None
        Reference separation for the linearization.  When None, ``fit``
        locates it by minimizing the weighted moment misfit of the pooled
        sample mean.
    tail_tol : float
        Only used to pick the number of modes when none is implied by data.
    min_mean : float
        Modes with smaller mean counts are ignored.
    refine : bool
        If True, ``predict`` follows the one-step estimate with a root solve
        of the weighted moment equation.

    Attributes
    ----------
    d0_ : float
    modes_ : ndarray of populated mode indices
    weights_ : ndarray, linear estimator weights on ``modes_``
    information_ : float, per-shot sensitivity dN^T L^-1 dN
    """

    def __init__(
        self,
        n_s=1.0,
        kappa=1.0,
        omega=1.0,
        r=0.0,
        theta=0.0,
        g2=1.0,
        d0=None,
        tail_tol=1e-13,
        min_mean=1e-15,
        refine=False,
    ):
        self.n_s = n_s
        self.kappa = kappa
        self.omega = omega
        self.r = r
        self.theta = theta
        self.g2 = g2
        self.d0 = d0
        self.tail_tol = tail_tol
        self.min_mean = min_mean
        self.refine = refine

    def _models(self):
        return (
            SourceParams(n_s=self.n_s, g2=self.g2, r=self.r, theta=self.theta),
            OpticsParams(kappa=self.kappa, omega=self.omega),
        )

    def _locate_d0(self, pooled, source, optics, basis):
        def misfit(d):
            means = mode_counts(source, optics, d, basis)
            keep = means > self.min_mean
            resid = pooled[keep] - means[keep]
            return float(resid @ inv_covariance(means[keep], source.g2) @ resid)

        upper = 8.0 * optics.omega
        grid = np.linspace(0.0, upper, 161)
        i = int(np.argmin([misfit(d) for d in grid]))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        res = minimize_scalar(misfit, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        return float(res.x)

    def fit(self, X, y=None):
        """Validate count data and linearize the moment model.

        X : array of shape (n_samples, n_modes), sample-mean counts for HG
        modes 0..n_modes-1.
        """
        X = validate_data(self, X, dtype=np.float64, ensure_min_samples=1)
        source, optics = self._models()
        basis = ModeBasis(X.shape[1] - 1, self.tail_tol)
        if self.d0 is None:
            d0 = self._locate_d0(X.mean(axis=0), source, optics, basis)
        else:
            if self.d0 < 0:
                raise ParameterError(f"d0 must be non-negative, got {self.d0!r}")
            d0 = float(self.d0)
        self.linearization_ = linearize(source, optics, d0, basis, self.min_mean)
        self.d0_ = d0
        self.modes_ = self.linearization_.modes
        self.weights_ = self.linearization_.weights
        self.information_ = self.linearization_.information
        return self

    def predict(self, X):
        """Separation estimate for each row of ``X``."""
        check_is_fitted(self, "linearization_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        if not self.refine:
            return self.linearization_.estimate(X)
        source, optics = self._models()
        return np.array([refine_estimate(row, self.linearization_, source, optics) for row in X])

    def predict_variance(self, tau):
        """Predicted variance of the estimate from ``tau``-shot sample means."""
        check_is_fitted(self, "linearization_")
        return 1.0 / (tau * self.information_)

    @classmethod
    def from_params(cls, source: SourceParams, optics: OpticsParams, **kwargs):
        return cls(
            n_s=source.n_s,
            kappa=optics.kappa,
            omega=optics.omega,
            r=source.r,
            theta=source.theta,
            g2=source.g2,
            **kwargs,
        )
