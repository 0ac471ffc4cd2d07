"""Entangled source pair produced by a two-mode squeezer (OPA) fed with one incident mode.

The incident mode s0 and a vacuum mode v0 are mixed by a two-mode squeezer
with real squeezing ``r``; a phase ``theta`` is then applied to the second
output.  Only first and second moments of the incident field enter anywhere
downstream: its mean photon number ``n_s`` and its second-order coherence ``g2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SourceParams:
    """Incident field statistics and OPA settings.

    ``theta`` is stored reduced to [0, 2*pi).  Range checks on ``n_s`` and
    ``r`` happen at construction; the physicality check on ``g2`` is only
    applied by ``validate(..., strict=True)`` because the figure sweeps treat
    ``g2`` as a free axis.
    """

    n_s: float = 1.0
    g2: float = 1.0
    r: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)
        _check_ranges(self)

    @property
    def eta(self) -> float:
        return eta(self.r, self.theta)


@dataclass(frozen=True)
class CoherencyMatrix:
    """<s_i^dagger s_j> for the two source modes."""

    n1: float
    n2: float
    c: complex

    def as_array(self) -> np.ndarray:
        return np.array([[self.n1, self.c], [np.conj(self.c), self.n2]], dtype=complex)


@dataclass(frozen=True)
class IncidentMoment:
    """Complex second moment <s0^2> of the incident field (unchecked)."""

    s0_squared: complex

    @classmethod
    def coherent(cls, n_s: float, phase: float = 0.0) -> "IncidentMoment":
        return cls(n_s * np.exp(2j * phase))

    @classmethod
    def thermal(cls) -> "IncidentMoment":
        return cls(0j)


def _check_ranges(params):
    for name in ("n_s", "g2", "r", "theta"):
        if not math.isfinite(getattr(params, name)):
            raise ParameterError(f"{name} must be finite, got {getattr(params, name)!r}")
    if params.n_s < 0:
        raise ParameterError(f"n_s must be non-negative, got {params.n_s!r}")
    if params.r < 0:
        raise ParameterError(f"r must be non-negative, got {params.r!r}")
    if params.g2 < 0:
        raise ParameterError(f"g2 must be non-negative, got {params.g2!r}")


def validate(params: SourceParams, strict: bool = False, n_detected: float | None = None) -> SourceParams:
    """Check ``params`` and return it unchanged.

    With ``strict`` the incident photon-number variance must be non-negative
    (``g2 >= 1 - 1/n_s``) and, if ``n_detected`` is given, the detected
    total-count variance ``1 + (g2 - 1) n_detected`` must be positive.
    """
    _check_ranges(params)
    if strict:
        if params.n_s > 0 and params.g2 < 1.0 - 1.0 / params.n_s:
            raise ParameterError(
                f"g2={params.g2} is unphysical for n_s={params.n_s} (needs g2 >= {1.0 - 1.0 / params.n_s:.6g})"
            )
        if n_detected is not None and 1.0 + (params.g2 - 1.0) * n_detected <= 0:
            raise DomainError(
                f"g2={params.g2} with N_D={n_detected} gives a non-positive total-count variance"
            )
    return params


def eta(r, theta):
    """Interference parameter cos(theta) sinh(2r)."""
    if r < 0:
        raise ParameterError(f"r must be non-negative, got {r!r}")
    return math.cos(theta) * math.sinh(2.0 * r)


def mode_transform(r, theta):
    """Matrix taking (s0, v0^dagger) to (s1, s2^dagger)."""
    if r < 0:
        raise ParameterError(f"r must be non-negative, got {r!r}")
    ch, sh = math.cosh(r), math.sinh(r)
    phase = np.diag([1.0, np.exp(1j * theta)])
    return phase @ np.array([[ch, -sh], [-sh, ch]], dtype=complex)


def coherency(params: SourceParams, moment: IncidentMoment | None = None) -> CoherencyMatrix:
    """First-order coherency matrix of the two source modes.

    The cross term is <s1^dagger s2> = -1/2 exp(-i theta) sinh(2r) <s0^dagger 2>,
    i.e. it uses the conjugate of the supplied ``<s0^2>``.  Nothing else in the
    package consumes it.  ``moment`` defaults to a coherent state with real
    amplitude.
    """
    if moment is None:
        moment = IncidentMoment.coherent(params.n_s)
    ch2, sh2 = math.cosh(params.r) ** 2, math.sinh(params.r) ** 2
    n1 = params.n_s * ch2 + sh2
    n2 = params.n_s * sh2 + sh2
    c = -0.5 * np.exp(-1j * params.theta) * np.conj(moment.s0_squared) * math.sinh(2.0 * params.r)
    return CoherencyMatrix(n1, n2, complex(c))
