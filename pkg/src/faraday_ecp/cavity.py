"""Low-Q cavity reflection: input-output coefficients and Faraday phases.

Frequencies and rates share one arbitrary unit. ``omega_c`` is the cavity
mode frequency (paired with ``kappa``) and ``omega_0`` the atomic transition
frequency (paired with ``gamma``).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import InvalidParams, PurePhaseApproxViolated, SingularDenominator

_SINGULAR = 1e-30
_SNAP = 1e-15


@dataclass(frozen=True)
class CavityParams:
    kappa: float
    gamma: float
    omega_c: float
    omega_0: float
    omega_p: float
    g: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise InvalidParams(f"kappa must be > 0, got {self.kappa}")
        if self.gamma < 0:
            raise InvalidParams(f"gamma must be >= 0, got {self.gamma}")
        if self.g < 0:
            raise InvalidParams(f"g must be >= 0, got {self.g}")

    @classmethod
    def operating_point(cls, kappa: float = 1.0, omega_c: float = 0.0) -> "CavityParams":
        """Resonant atom, photon detuned by -kappa/2, g = kappa/2, no atomic decay."""
        return cls(kappa=kappa, gamma=0.0, omega_c=omega_c, omega_0=omega_c,
                   omega_p=omega_c - kappa / 2, g=kappa / 2)


def reflection_coefficient(p: CavityParams) -> complex:
    """Ratio a_out / a_in for a photon reflected off the coupled atom-cavity system."""
    cav = 1j * (p.omega_c - p.omega_p)
    atom = 1j * (p.omega_0 - p.omega_p) + p.gamma / 2
    num = (cav - p.kappa / 2) * atom + p.g ** 2
    den = (cav + p.kappa / 2) * atom + p.g ** 2
    if abs(den) <= _SINGULAR:
        if p.g == 0:
            # removable: the atom factor cancels and the empty-cavity ratio remains
            return empty_cavity_coefficient(p)
        raise SingularDenominator(f"reflection coefficient denominator vanishes for {p}")
    return num / den


def empty_cavity_coefficient(p: CavityParams) -> complex:
    cav = 1j * (p.omega_c - p.omega_p)
    return (cav - p.kappa / 2) / (cav + p.kappa / 2)


def _principal_arg(z: complex) -> float:
    """Argument in (-pi, pi]; values within 1e-12 of -pi are reported as pi."""
    phi = math.atan2(z.imag, z.real)
    if phi <= -math.pi + 1e-12:
        phi += 2 * math.pi
    return phi


@dataclass(frozen=True)
class FaradayPhases:
    phi: float
    phi0: float
    mag: float = 1.0
    mag0: float = 1.0

    @property
    def theta_minus(self) -> float:
        return (self.phi0 - self.phi) / 2

    @property
    def theta_plus(self) -> float:
        return (self.phi - self.phi0) / 2

    def to_dict(self) -> dict:
        return {
            "phi": self.phi,
            "phi0": self.phi0,
            "mag": self.mag,
            "mag0": self.mag0,
            "theta_minus": self.theta_minus,
            "theta_plus": self.theta_plus,
        }


IDEAL_PHASES = FaradayPhases(phi=math.pi, phi0=math.pi / 2)


def faraday_phases(p: CavityParams, tol_mag: float = 0.01) -> FaradayPhases:
    """Phases of the coupled and empty-cavity reflection coefficients.

    Raises :class:`PurePhaseApproxViolated` when ``|1 - |r|| > tol_mag``.
    """
    if not 0 < tol_mag <= 0.5:
        raise InvalidParams(f"tol_mag must lie in (0, 0.5], got {tol_mag}")
    r = reflection_coefficient(p)
    r0 = empty_cavity_coefficient(p)
    mag = abs(r)
    if abs(1 - mag) > tol_mag:
        raise PurePhaseApproxViolated(
            f"|r| = {mag:.6g} deviates from 1 by more than {tol_mag}; "
            "the reflected photon is not a pure phase shift for these parameters"
        )
    return FaradayPhases(phi=_principal_arg(r), phi0=_principal_arg(r0), mag=mag, mag0=abs(r0))


def _unit(phase: float) -> complex:
    z = cmath.exp(1j * phase)
    re = 0.0 if abs(z.real) < _SNAP else z.real
    im = 0.0 if abs(z.imag) < _SNAP else z.imag
    return complex(re, im)


def interaction_gate(phases: FaradayPhases = IDEAL_PHASES) -> dict[tuple[str, str], complex]:
    """Joint (photon, atom) phase table: a polarization coupled to the atom's
    ground level picks up ``phi``, the uncoupled one ``phi0``."""
    coupled = _unit(phases.phi)
    empty = _unit(phases.phi0)
    return {
        ("L", "gL"): coupled,
        ("R", "gL"): empty,
        ("L", "gR"): empty,
        ("R", "gR"): coupled,
    }


IDEAL_GATE = interaction_gate(IDEAL_PHASES)
