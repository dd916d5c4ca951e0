"""Trap parameters and potentials for a single atom in a moving tweezer.

All quantities are strict SI. Magnitudes range from ~1e-34 (hbar) to ~1e-2
(transport distance), comfortably inside double precision, so nothing is
rescaled internally.

The anharmonic Hamiltonian is ``p^2/2m + m w0^2 u^2 / 2 - eta u^4`` with
``u = x - x0(t)``; the quartic term softens the trap away from its center,
which is what the on-axis expansion of a focused Gaussian beam gives.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

HBAR = 1.054571817e-34
RB87_MASS = 1.44269e-25


class ConfigurationError(ValueError):
    """Inconsistent or incomplete physical configuration."""


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = HBAR

    def __post_init__(self):
        if not self.hbar > 0:
            raise ConfigurationError(f"hbar must be positive, got {self.hbar}")


class PotentialKind(str, enum.Enum):
    HARMONIC_ONLY = "harmonic"
    HARMONIC_PLUS_QUARTIC = "quartic"
    GAUSSIAN_MATCHED = "gaussian"


@dataclass(frozen=True)
class TweezerSpec:
    """Optical tweezer description.

    Exactly one of ``depth`` (V0) and ``omega0`` must be given. ``rayleigh``
    defaults to ``pi * waist**2 / wavelength``; when it is given directly the
    waist and wavelength are not needed.
    """

    waist: Optional[float] = None
    wavelength: Optional[float] = None
    depth: Optional[float] = None
    rayleigh: Optional[float] = None
    omega0: Optional[float] = None

    def rayleigh_length(self) -> float:
        if self.rayleigh is not None:
            if not self.rayleigh > 0:
                raise ConfigurationError("rayleigh must be positive")
            return self.rayleigh
        if self.waist is None or self.wavelength is None:
            missing = "waist" if self.waist is None else "wavelength"
            raise ConfigurationError(
                f"tweezer spec needs rayleigh, or waist and wavelength (missing {missing})"
            )
        if not (self.waist > 0 and self.wavelength > 0):
            raise ConfigurationError("waist and wavelength must be positive")
        return math.pi * self.waist**2 / self.wavelength


@dataclass(frozen=True)
class TrapSpec:
    mass: float
    omega0: float
    eta: float
    distance: float

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigurationError(f"mass must be positive, got {self.mass}")
        if not self.omega0 > 0:
            raise ConfigurationError(f"omega0 must be positive, got {self.omega0}")
        if not self.eta >= 0:
            raise ConfigurationError(f"eta must be non-negative, got {self.eta}")
        if not self.distance > 0:
            raise ConfigurationError(f"distance must be positive, got {self.distance}")

    @property
    def stiffness(self) -> float:
        """Harmonic coefficient m*w0^2 (the potential is half this times u^2)."""
        return self.mass * self.omega0**2

    @property
    def rayleigh(self) -> float:
        """Beam Rayleigh length reconstructed from (omega0, eta)."""
        if self.eta == 0:
            return math.inf
        return math.sqrt(self.stiffness / (2.0 * self.eta))

    @property
    def depth(self) -> float:
        """Trap depth V0 reconstructed from (omega0, eta)."""
        if self.eta == 0:
            return math.inf
        return 0.5 * self.stiffness * self.rayleigh**2

    def oscillator_length(self, hbar: float = HBAR) -> float:
        return math.sqrt(hbar / (self.mass * self.omega0))


def reference_trap(distance: float = 1e-2) -> TrapSpec:
    """Rb-87 in a 1060 nm tweezer with w0 = 50 lambda and w0 = 2 pi x 20 Hz."""
    wavelength = 1060e-9
    tweezer = TweezerSpec(waist=50 * wavelength, wavelength=wavelength, omega0=2 * math.pi * 20)
    return derive_trap(tweezer, RB87_MASS, distance)


def derive_trap(tweezer: TweezerSpec, mass: float, distance: float) -> TrapSpec:
    """Expand the on-axis tweezer potential to quartic order.

    ``omega0 = sqrt(2 V0 / m zR^2)`` and ``eta = V0 / zR^4``.
    """
    zr = tweezer.rayleigh_length()
    if tweezer.depth is None and tweezer.omega0 is None:
        raise ConfigurationError("tweezer spec needs one of depth or omega0 (neither given)")
    if tweezer.depth is not None and tweezer.omega0 is not None:
        implied = 0.5 * mass * tweezer.omega0**2 * zr**2
        if not math.isclose(implied, tweezer.depth, rel_tol=1e-9):
            raise ConfigurationError(
                f"depth and omega0 both given and inconsistent: depth={tweezer.depth!r} J, "
                f"omega0 implies {implied!r} J"
            )
    if tweezer.omega0 is not None:
        omega0 = float(tweezer.omega0)
        depth = 0.5 * mass * omega0**2 * zr**2
    else:
        depth = float(tweezer.depth)
        if not depth > 0:
            raise ConfigurationError("depth must be positive")
        omega0 = math.sqrt(2.0 * depth / (mass * zr**2))
    return TrapSpec(mass=mass, omega0=omega0, eta=depth / zr**4, distance=distance)


def potential_value(kind: PotentialKind, trap: TrapSpec, u):
    """Trap potential at displacement ``u`` from the trap center (vectorized)."""
    kind = PotentialKind(kind)
    u = np.asarray(u, dtype=float)
    u2 = u * u
    if kind is PotentialKind.HARMONIC_ONLY:
        out = 0.5 * trap.stiffness * u2
    elif kind is PotentialKind.HARMONIC_PLUS_QUARTIC:
        out = u2 * (0.5 * trap.stiffness - trap.eta * u2)
    else:
        if trap.eta <= 0:
            raise ConfigurationError("GaussianMatched potential requires eta > 0")
        zr = trap.rayleigh
        # -expm1 keeps full precision for u << zR
        out = -0.5 * trap.depth * np.expm1(-2.0 * u2 / zr**2)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class CompensationParams:
    omega_tilde: float
    x_tilde: float
    A: float
    C: float


def compensating_parameters(
    trap: TrapSpec, x0: float, x0_accel: float, quartic_sign: int = 1
) -> CompensationParams:
    """Harmonic part of the compensated potential, completed to a square.

    The compensated potential ``m w0^2 (x-x0)^2/2 + s*eta*(x-x0)^4 - m x a0`` is
    rewritten as ``A (x - x_tilde)^2 + B + C`` with ``B = s*eta*(x^4 - 4 x^3 x0)``.
    ``quartic_sign=+1`` is the form whose frequency is
    ``sqrt(w0^2 + 12 eta x0^2 / m)``; pass ``-1`` to rewrite the softening
    Hamiltonian used by :func:`potential_value`.
    """
    if quartic_sign not in (1, -1):
        raise ValueError("quartic_sign must be +1 or -1")
    m, w0 = trap.mass, trap.omega0
    k = quartic_sign * trap.eta
    w_sq = w0**2 + 12.0 * k * x0**2 / m
    if not w_sq > 0:
        raise ConfigurationError(f"compensated harmonic part is not confining at x0={x0!r}")
    A = 0.5 * m * w_sq
    lin = 0.5 * m * w0**2 * x0 + 0.5 * m * x0_accel + 2.0 * k * x0**3
    C = k * x0**4 + 0.5 * m * w0**2 * x0**2 - lin**2 / A
    return CompensationParams(omega_tilde=math.sqrt(w_sq), x_tilde=lin / A, A=A, C=C)


def compensated_potential(kind: PotentialKind, trap: TrapSpec, x, x0, x0_accel):
    """Moving potential plus the linear term ``-m x a0`` cancelling the inertial force."""
    x = np.asarray(x, dtype=float)
    out = potential_value(kind, trap, x - x0) - trap.mass * x * x0_accel
    return out if np.ndim(out) else float(out)


def compensated_potential_completed(trap: TrapSpec, x, x0: float, x0_accel: float, quartic_sign: int = 1):
    """Same potential as :func:`compensated_potential` in completed-square form."""
    p = compensating_parameters(trap, x0, x0_accel, quartic_sign)
    x = np.asarray(x, dtype=float)
    B = quartic_sign * trap.eta * (x**4 - 4.0 * x**3 * x0)
    out = p.A * (x - p.x_tilde) ** 2 + B + p.C
    return out if np.ndim(out) else float(out)
