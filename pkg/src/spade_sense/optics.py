"""Gaussian PSF, Hermite-Gauss measurement modes and their overlap coefficients.

Lengths are in the same (arbitrary) units as the PSF width ``omega``.  The
two sources sit on the x axis at ``-d/2`` (source 1) and ``+d/2`` (source 2);
with that placement the closed-form coefficients carry the ``(-1)**m`` on the
source-1 term.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy.special import gammainc

from .errors import ConvergenceError, ParameterError

# Above this index the G_m coefficients are evaluated in log space.
LOG_SPACE_FROM = 30
# Smallest cutoff handed out by ModeBasis.for_gamma.
CUTOFF_FLOOR = 16


@dataclass(frozen=True)
class OpticsParams:
    """Diffraction-limited imaging system.

    kappa : transmissivity, 0 < kappa <= 1
    omega : PSF width
    """

    kappa: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.kappa <= 1.0:
            raise ParameterError(f"kappa must lie in (0, 1], got {self.kappa!r}")
        if not self.omega > 0.0:
            raise ParameterError(f"omega must be positive, got {self.omega!r}")


@dataclass(frozen=True)
class ModeBasis:
    """HG modes ``0..cutoff`` (inclusive) kept in a truncated measurement."""

    cutoff: int
    tail_tol: float = 1e-13

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 0:
            raise ParameterError(f"cutoff must be a non-negative integer, got {self.cutoff!r}")
        if not 0.0 < self.tail_tol < 1.0:
            raise ParameterError(f"tail_tol must lie in (0, 1), got {self.tail_tol!r}")

    @classmethod
    def for_gamma(cls, gamma: float, tail_tol: float = 1e-13, floor: int = CUTOFF_FLOOR) -> "ModeBasis":
        """Basis whose neglected tail mass at ``gamma`` is below ``tail_tol``.

        The cutoff is never smaller than ``floor``.
        """
        return cls(max(choose_cutoff(gamma, tail_tol), floor), tail_tol)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.cutoff + 1)


@dataclass(frozen=True)
class Quadrature:
    """Uniform trapezoid grid used by the overlap oracle.

    half_width is measured in units of omega, beyond the source offset.
    """

    half_width: float = 8.0
    points: int = 512

    def __post_init__(self):
        if self.half_width < 6:
            raise ParameterError(f"half_width must be >= 6, got {self.half_width!r}")
        if self.points < 64:
            raise ParameterError(f"points must be >= 64, got {self.points!r}")


def _check_omega(omega):
    if not omega > 0:
        raise ParameterError(f"omega must be positive, got {omega!r}")


def _check_gamma(gamma):
    if gamma < 0:
        raise ParameterError(f"gamma must be non-negative, got {gamma!r}")


def psf(x, y, omega):
    """Gaussian amplitude PSF, normalized so that its square integrates to one."""
    _check_omega(omega)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.sqrt(2.0 / (np.pi * omega**2)) * np.exp(-(x**2 + y**2) / omega**2)


def _hermite_functions(m, t):
    """H_m(t) / sqrt(2**m m!) by the normalized three-term recurrence."""
    prev = np.zeros_like(t)
    cur = np.ones_like(t)
    for k in range(1, m + 1):
        prev, cur = cur, math.sqrt(2.0 / k) * t * cur - math.sqrt((k - 1) / k) * prev
    return cur


def hg_mode(m, x, y, omega):
    """Hermite-Gauss measurement mode of order ``m`` along x."""
    if m < 0:
        raise ParameterError(f"mode index must be non-negative, got {m!r}")
    _check_omega(omega)
    x = np.asarray(x, dtype=float)
    return _hermite_functions(m, np.sqrt(2.0) * x / omega) * psf(x, y, omega)


def g_coeff(m, gamma):
    """gamma**m exp(-gamma**2/2) / sqrt(m!)."""
    _check_gamma(gamma)
    if m < 0:
        raise ParameterError(f"mode index must be non-negative, got {m!r}")
    if gamma == 0:
        return 1.0 if m == 0 else 0.0
    if m > LOG_SPACE_FROM:
        return math.exp(m * math.log(gamma) - 0.5 * gamma**2 - 0.5 * math.lgamma(m + 1))
    return gamma**m * math.exp(-0.5 * gamma**2) / math.sqrt(math.factorial(m))


def g_coeffs(cutoff, gamma):
    """Vector of ``g_coeff(m, gamma)`` for m = 0..cutoff."""
    return np.array([g_coeff(m, gamma) for m in range(cutoff + 1)])


def g_coeff_deriv(m, gamma):
    """d g_coeff / d gamma, written as sqrt(m) G_{m-1} - gamma G_m (no division by gamma)."""
    lower = math.sqrt(m) * g_coeff(m - 1, gamma) if m > 0 else 0.0
    return lower - gamma * g_coeff(m, gamma)


def g_coeff_derivs(cutoff, gamma):
    g = g_coeffs(cutoff, gamma)
    m = np.arange(cutoff + 1)
    lower = np.zeros_like(g)
    lower[1:] = np.sqrt(m[1:]) * g[:-1]
    return lower - gamma * g


def overlap_p(d, omega):
    """Overlap of the two displaced PSF images, exp(-d**2 / (2 omega**2))."""
    _check_omega(omega)
    return math.exp(-(d**2) / (2.0 * omega**2))


def a_coeff(m, d, optics: OpticsParams, r, theta):
    """Closed-form amplitude of the source field in HG mode ``m``."""
    if d < 0:
        raise ParameterError(f"separation must be non-negative, got {d!r}")
    gamma = d / (2.0 * optics.omega)
    weight = (-1) ** m * math.cosh(r) - np.exp(1j * theta) * math.sinh(r)
    return complex(math.sqrt(optics.kappa) * weight * g_coeff(m, gamma))


# Working precision of the overlap oracle.  For small gamma the overlaps of
# high modes are ~1e-12 while the integrand is O(1), so a double-precision sum
# loses about five digits to cancellation.
ORACLE_DPS = 40


@lru_cache(maxsize=256)
def _source_overlaps(d, omega, half_width, points, top):
    """Trapezoid x-overlaps of modes 0..top with the two displaced PSF profiles."""
    with mpmath.workdps(ORACLE_DPS):
        d, omega = mpmath.mpf(d), mpmath.mpf(omega)
        reach = half_width * omega + d / 2
        step = 2 * reach / (points - 1)
        norm = mpmath.sqrt(2 / (mpmath.pi * omega**2))
        left = [mpmath.mpf(0)] * (top + 1)
        right = [mpmath.mpf(0)] * (top + 1)
        for j in range(points):
            x = -reach + j * step
            weight = step / 2 if j in (0, points - 1) else step
            base = norm * mpmath.exp(-(x**2) / omega**2) * weight
            g1 = base * mpmath.exp(-((x + d / 2) ** 2) / omega**2)
            g2 = base * mpmath.exp(-((x - d / 2) ** 2) / omega**2)
            t = mpmath.sqrt(2) * x / omega
            prev, cur = mpmath.mpf(0), mpmath.mpf(1)
            for k in range(top + 1):
                if k:
                    prev, cur = cur, mpmath.sqrt(mpmath.mpf(2) / k) * t * cur - mpmath.sqrt(mpmath.mpf(k - 1) / k) * prev
                left[k] += cur * g1
                right[k] += cur * g2
        return tuple(float(v) for v in left), tuple(float(v) for v in right)


def _overlap_1d(m, d, optics, r, theta, points, half_width):
    # the y dependence of mode and PSFs is the same normalized Gaussian, so the
    # y-integral contributes exactly 1; only the x profiles are integrated here
    left, right = _source_overlaps(float(d), float(optics.omega), float(half_width), int(points), max(m, 10))
    field = left[m] * math.cosh(r) - right[m] * np.exp(1j * theta) * math.sinh(r)
    return math.sqrt(optics.kappa) * complex(field)


def a_coeff_numeric(m, d, optics: OpticsParams, r, theta, quad: Quadrature | None = None):
    """Mode amplitude by direct quadrature of the overlap integral.

    Independent of :func:`a_coeff`; evaluated twice (``points`` and
    ``2*points`` nodes) and rejected if the two disagree by more than 1e-10.
    """
    if m < 0:
        raise ParameterError(f"mode index must be non-negative, got {m!r}")
    if d < 0:
        raise ParameterError(f"separation must be non-negative, got {d!r}")
    quad = quad or Quadrature()
    coarse = _overlap_1d(m, d, optics, r, theta, quad.points, quad.half_width)
    fine = _overlap_1d(m, d, optics, r, theta, 2 * quad.points, quad.half_width)
    if abs(fine - coarse) > 1e-10:
        raise ConvergenceError(
            f"overlap quadrature for m={m} did not converge: refinement changed result by {abs(fine - coarse):.3e}"
        )
    return fine


def choose_cutoff(gamma, tail_tol):
    """Smallest M such that sum_{m>M} G_m(gamma)**2 < tail_tol.

    G_m**2 is the Poisson(gamma**2) mass function, so the tail is
    P(X > M) = P(M+1, gamma**2) with P the regularized lower incomplete gamma.
    """
    _check_gamma(gamma)
    if not 0.0 < tail_tol < 1.0:
        raise ParameterError(f"tail_tol must lie in (0, 1), got {tail_tol!r}")
    mu = gamma**2
    cutoff = 0
    while gammainc(cutoff + 1, mu) >= tail_tol:
        cutoff += 1
    return cutoff
