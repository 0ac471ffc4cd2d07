"""Method-of-moments sensitivities for the separation.

The total sensitivity splits into a relative-intensity part (RIM, how the
photons distribute over the HG modes) and a total-photon part (TPD, how the
total count moves with d):

    Re_d = N_D * Re_rim + Re_tpd,   var(d) = 1 / (tau * Re_d)

Normalized values strip the intensity and the PSF width:
R_rim = omega**2 N_D Re_rim / (n_s kappa), R_tpd = omega**2 Re_tpd / (n_s kappa),
and R_total = R_rim + R_tpd.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import minimize_scalar

from .detection import total_count
from .errors import CutoffError, DomainError, ParameterError
from .optics import ModeBasis, OpticsParams, g_coeffs, overlap_p
from .source import SourceParams

# Relative size of the last RIM term below which the mode sum counts as converged.
RIM_LAST_TERM_TOL = 1e-14
_MAX_CUTOFF = 4000


@dataclass(frozen=True)
class SensitivityReport:
    re_rim: float
    re_tpd: float
    re_total: float
    r_rim: float
    r_tpd: float
    r_total: float
    n_d: float
    tau: float
    var_d: float


class Baseline(str, Enum):
    INCOHERENT = "incoherent"
    MUTUALLY_COHERENT = "mutually_coherent"
    ENTANGLED = "entangled"


def _gamma(d, optics):
    if d < 0:
        raise ParameterError(f"separation must be non-negative, got {d!r}")
    return d / (2.0 * optics.omega)


def _brightness(source: SourceParams, optics: OpticsParams) -> float:
    nk = source.n_s * optics.kappa
    if nk <= 0:
        raise ParameterError("normalized sensitivities need n_s * kappa > 0")
    return nk


def _rim_terms(source, optics, gamma, cutoff):
    eta = source.eta
    ch = math.cosh(2.0 * source.r)
    p = math.exp(-2.0 * gamma**2)
    s = ch - p * eta
    m = np.arange(cutoff + 1)
    signs = np.where(m % 2 == 0, 1.0, -1.0)
    rel = (ch - signs * eta) * g_coeffs(cutoff, gamma) ** 2 / s
    # d ln(N_m / N_D) / d gamma; the 2m/gamma piece is what makes the
    # m >= 1 terms finite as gamma -> 0 (rel ~ gamma**(2m))
    logderiv = 2.0 * m / gamma - 2.0 * gamma - 4.0 * gamma * eta * p / s
    return rel * logderiv**2 / (4.0 * optics.omega**2)


def rim_numeric(source: SourceParams, optics: OpticsParams, d: float, basis: ModeBasis | None = None) -> float:
    """RIM sensitivity by explicit summation over the HG modes.

    With ``basis=None`` the cutoff grows until the last term is negligible;
    an explicit ``basis`` that is too small raises :class:`CutoffError`.
    """
    gamma = _gamma(d, optics)
    if gamma == 0:
        raise ParameterError("rim_numeric needs d > 0; use rim_closed_form at d = 0")
    if basis is not None:
        terms = _rim_terms(source, optics, gamma, basis.cutoff)
        total = math.fsum(terms)
        if terms[-1] > RIM_LAST_TERM_TOL * total:
            raise CutoffError(
                f"RIM sum not converged at cutoff {basis.cutoff}: last term {terms[-1]:.3e} of {total:.3e}"
            )
        return total
    cutoff = ModeBasis.for_gamma(gamma).cutoff
    while True:
        terms = _rim_terms(source, optics, gamma, cutoff)
        total = math.fsum(terms)
        if terms[-1] <= RIM_LAST_TERM_TOL * total:
            return total
        if cutoff >= _MAX_CUTOFF:
            raise CutoffError(f"RIM sum not converged below cutoff {_MAX_CUTOFF}")
        cutoff += 8


def rim_normalized(source: SourceParams, optics: OpticsParams, d: float) -> float:
    """Normalized RIM sensitivity over the full basis (closed form)."""
    gamma = _gamma(d, optics)
    eta = source.eta
    ch = math.cosh(2.0 * source.r)
    p = math.exp(-2.0 * gamma**2)
    s = ch - p * eta
    return ch + p * eta - (d / optics.omega) ** 2 * p * eta * ch / s


def rim_closed_form(source: SourceParams, optics: OpticsParams, d: float) -> float:
    """RIM sensitivity over the full basis; exact at d = 0 as well."""
    s = math.cosh(2.0 * source.r) - overlap_p(d, optics.omega) * source.eta
    return rim_normalized(source, optics, d) / (optics.omega**2 * s)


def tpd_normalized(source: SourceParams, optics: OpticsParams, d: float) -> float:
    gamma = _gamma(d, optics)
    nk = source.n_s * optics.kappa
    eta = source.eta
    p = math.exp(-2.0 * gamma**2)
    s = math.cosh(2.0 * source.r) - p * eta
    noise = 1.0 + (source.g2 - 1.0) * nk * s
    if noise <= 0:
        raise DomainError(
            f"total-count variance is not positive (1 + (g2-1) N_D = {noise:.6g}) "
            f"at r={source.r}, theta={source.theta}, g2={source.g2}, n_s*kappa={nk}, d={d}"
        )
    return (d * p * eta) ** 2 / (optics.omega**2 * s * noise)


def tpd(source: SourceParams, optics: OpticsParams, d: float) -> float:
    """TPD sensitivity (dN_D/dd)**2 / var(N_D)."""
    return source.n_s * optics.kappa * tpd_normalized(source, optics, d) / optics.omega**2


def total(
    source: SourceParams,
    optics: OpticsParams,
    d: float,
    basis: ModeBasis | None = None,
    tau: float = 1.0,
    method: str = "closed",
) -> SensitivityReport:
    """Full sensitivity report at separation ``d`` for ``tau`` shots.

    ``method="numeric"`` takes the RIM part from the explicit mode sum over
    ``basis`` instead of the closed form (d > 0 only).
    """
    if tau <= 0:
        raise ParameterError(f"tau must be positive, got {tau!r}")
    nk = _brightness(source, optics)
    n_d = total_count(source, optics, d)
    if method == "closed":
        r_rim = rim_normalized(source, optics, d)
        re_rim = r_rim * nk / (optics.omega**2 * n_d)
    elif method == "numeric":
        re_rim = rim_numeric(source, optics, d, basis)
        r_rim = optics.omega**2 * n_d * re_rim / nk
    else:
        raise ParameterError(f"unknown method {method!r}")
    r_tpd = tpd_normalized(source, optics, d)
    re_tpd = nk * r_tpd / optics.omega**2
    re_total = n_d * re_rim + re_tpd
    return SensitivityReport(
        re_rim=re_rim,
        re_tpd=re_tpd,
        re_total=re_total,
        r_rim=r_rim,
        r_tpd=r_tpd,
        r_total=r_rim + r_tpd,
        n_d=n_d,
        tau=tau,
        var_d=1.0 / (tau * re_total),
    )


def baseline(kind, arg: float | None = None) -> float:
    """Normalized total sensitivity as d -> 0 for reference source types.

    ``arg`` is the beam-splitter transmissivity T for mutually coherent
    sources and the squeezing r for entangled ones; incoherent ignores it.
    """
    kind = Baseline(kind)
    if kind is Baseline.INCOHERENT:
        return 1.0
    if kind is Baseline.MUTUALLY_COHERENT:
        if arg is None or not 0.0 <= arg <= 1.0:
            raise ParameterError(f"transmissivity must lie in [0, 1], got {arg!r}")
        return 1.0 - 2.0 * math.sqrt(arg * (1.0 - arg))
    if arg is None or arg < 0:
        raise ParameterError(f"squeezing must be non-negative, got {arg!r}")
    return math.exp(2.0 * arg)


def asymptote_d0(source: SourceParams) -> float:
    """Limit of the normalized total sensitivity as d -> 0 for theta = 0: cosh 2r + sinh 2r."""
    if source.theta != 0.0:
        raise ParameterError(
            "the d -> 0 asymptote is only available for theta = 0; evaluate total() at small d instead"
        )
    return math.cosh(2.0 * source.r) + math.sinh(2.0 * source.r)


def optimal_tpd(source: SourceParams, optics: OpticsParams, gamma_max: float = 3.0) -> tuple[float, float]:
    """Largest normalized TPD sensitivity over d/(2 omega) in (0, gamma_max].

    Returns ``(gamma_at_max, value)``.
    """
    # coarse scan then bounded refinement around the best grid point
    grid = np.linspace(gamma_max / 600, gamma_max, 600)
    values = [tpd_normalized(source, optics, 2.0 * optics.omega * g) for g in grid]
    i = int(np.argmax(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(
        lambda g: -tpd_normalized(source, optics, 2.0 * optics.omega * g),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    if -res.fun >= values[i]:
        return float(res.x), float(-res.fun)
    return float(grid[i]), float(values[i])
