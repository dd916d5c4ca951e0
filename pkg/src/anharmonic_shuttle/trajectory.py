"""Transport protocols: classical trajectory x_c(t), control u(t) and trap path x_0(t).

The control is the displacement ``u = x_c - x_0`` between the atom's
classical center and the trap center. Newton's equation in the moving
harmonic trap gives ``u = -xc_ddot / w0^2``.

Fractional powers of negative numbers, e.g. ``(1 - 2s)**(7/3)``, are taken
on the real cube-root branch: ``y**(p/3) == cbrt(y)**p``.

The quasi-optimal protocols (cubic, unbounded, bounded) do not satisfy
``xc_ddot = 0`` at the ends, so the trap must jump at ``t = 0`` and ``t = tf``:
``u`` is zero for ``t <= 0`` and ``t >= tf`` and takes its one-sided limits
just inside the interval.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np


class DomainError(ValueError):
    """Time or sample set outside the domain of an operation."""


class InfeasibleBoundError(ValueError):
    """Displacement bound too tight for the requested duration."""


class BoundInactiveError(ValueError):
    """Displacement bound larger than the unbounded optimum ever reaches."""


class ProtocolKind(str, enum.Enum):
    POLYNOMIAL5 = "polynomial5"
    CUBIC_MIN_HARMONIC = "cubic"
    UNBOUNDED_OPTIMAL = "unbounded"
    BOUNDED_OPTIMAL = "bounded"


# protocols whose trap path jumps at t = 0 and t = tf
_JUMPING = {ProtocolKind.CUBIC_MIN_HARMONIC, ProtocolKind.UNBOUNDED_OPTIMAL, ProtocolKind.BOUNDED_OPTIMAL}

# one-sided sampling offset at the ends of a table, in units of tf
EDGE_OFFSET = 1e-9
DEFAULT_SAMPLES = 4097


@dataclass(frozen=True)
class ProtocolSpec:
    kind: ProtocolKind
    distance: float
    duration: float
    omega0: float
    bound: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ProtocolKind(self.kind))
        if not self.duration > 0:
            raise DomainError(f"duration must be positive, got {self.duration}")
        if not self.distance > 0:
            raise DomainError(f"distance must be positive, got {self.distance}")
        if not self.omega0 > 0:
            raise DomainError(f"omega0 must be positive, got {self.omega0}")
        if self.kind is ProtocolKind.BOUNDED_OPTIMAL:
            if self.bound is None:
                raise DomainError("bounded protocol requires a displacement bound")
        if self.bound is not None and not self.bound > 0:
            raise DomainError(f"bound must be positive, got {self.bound}")

    @property
    def delta_star(self) -> float:
        """Bound at which the bounded optimum degenerates to the unbounded one."""
        return 14.0 * self.distance / (3.0 * self.omega0**2 * self.duration**2)

    @property
    def delta_min(self) -> float:
        return 4.0 * self.distance / (self.omega0**2 * self.duration**2)


@dataclass(frozen=True)
class TrajectoryPoint:
    t: float
    xc: float
    xc_dot: float
    xc_ddot: float
    u: float
    x0: float


@dataclass(frozen=True)
class BoundedConstants:
    c1: float
    c2: float
    c3: float
    c4: float
    t1: float
    t2: float


class Verdict(str, enum.Enum):
    FEASIBLE = "feasible"
    BOUND_INACTIVE = "bound inactive"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class FeasibilityReport:
    delta: float
    delta_min: float
    delta_star: float
    tf: float
    tf_min: float
    tf_star: float
    quartic_dominance_threshold: Optional[float]
    verdict: Verdict

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["verdict"] = self.verdict.value
        return out


def bounded_constants(spec: ProtocolSpec) -> BoundedConstants:
    """Switching times and integration constants of the bounded optimum.

    Saturated arcs ``u = -delta`` on ``(0, t1)`` and ``u = +delta`` on
    ``(t1 + t2, tf)`` enclose the interior arc ``u = -(c2 - c1 t)^(1/3)``.
    """
    if spec.bound is None:
        raise DomainError("bounded constants need a displacement bound")
    d, tf, w0, delta = spec.distance, spec.duration, spec.omega0, spec.bound
    gap = w0**2 * tf**2 * delta - 4.0 * d
    if gap <= 0:
        raise InfeasibleBoundError(
            f"bound {delta!r} m must exceed 4d/(w0^2 tf^2) = {spec.delta_min!r} m for c1 to be real"
        )
    if delta > spec.delta_star * (1 + 1e-12):
        raise BoundInactiveError(
            f"bound {delta!r} m exceeds delta0 = {spec.delta_star!r} m: bound never active, "
            "use the unbounded optimal protocol"
        )
    c1 = 2.0 * w0 * math.sqrt(delta**7 / (7.0 * gap))
    c2 = c1 * tf / 2.0
    t1 = max(tf / 2.0 - delta**3 / c1, 0.0)
    t2 = tf - 2.0 * t1
    c3 = 0.5 * w0**2 * delta * tf - w0**2 * delta**4 / (4.0 * c1)
    # continuity of x_c at t1; the leading coefficient is -1/8
    c4 = (
        -(w0**2) * tf**2 * delta / 8.0
        + w0**2 * tf * delta**4 / (8.0 * c1)
        - w0**2 * delta**7 / (14.0 * c1**2)
    )
    return BoundedConstants(c1=c1, c2=c2, c3=c3, c4=c4, t1=t1, t2=t2)


@dataclass(frozen=True)
class Protocol:
    """A protocol spec bundled with whatever constants it needs; vectorized in ``t``."""

    spec: ProtocolSpec
    constants: Optional[BoundedConstants] = None

    def __post_init__(self):
        if self.spec.kind is ProtocolKind.BOUNDED_OPTIMAL and self.constants is None:
            raise DomainError("bounded protocol needs BoundedConstants")

    @property
    def kind(self) -> ProtocolKind:
        return self.spec.kind

    @property
    def duration(self) -> float:
        return self.spec.duration

    @property
    def omega0(self) -> float:
        return self.spec.omega0

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        """Points where the control is not smooth, including both ends."""
        tf = self.spec.duration
        if self.kind is ProtocolKind.UNBOUNDED_OPTIMAL:
            return (0.0, tf / 2, tf)
        if self.kind is ProtocolKind.BOUNDED_OPTIMAL:
            c = self.constants
            pts = sorted({0.0, c.t1, tf / 2, c.t1 + c.t2, tf})
            return tuple(pts)
        return (0.0, tf)

    @property
    def singular_points(self) -> Tuple[float, ...]:
        """Points where u behaves like |t - t*|^(1/3)."""
        if self.kind in (ProtocolKind.UNBOUNDED_OPTIMAL, ProtocolKind.BOUNDED_OPTIMAL):
            return (self.spec.duration / 2,)
        return ()

    def kinematics(self, t):
        """Return ``(xc, xc_dot, xc_ddot)`` at ``t`` in ``[0, tf]``."""
        t = np.asarray(t, dtype=float)
        tf = self.spec.duration
        if np.any(t < 0) or np.any(t > tf) or not np.all(np.isfinite(t)):
            raise DomainError(f"t must lie in [0, {tf!r}]")
        return _KINEMATICS[self.kind](self, t)

    def control(self, t):
        """Control u(t) on the whole real line, with the end jumps."""
        t = np.asarray(t, dtype=float)
        tf = self.spec.duration
        inside = (t > 0) & (t < tf)
        tc = np.clip(t, 0.0, tf)
        _, _, a = self.kinematics(tc)
        u = -a / self.spec.omega0**2
        if self.kind in _JUMPING:
            u = np.where(inside, u, 0.0)
        return u if u.ndim else float(u)

    def point(self, t: float) -> TrajectoryPoint:
        xc, v, a = (float(z) for z in self.kinematics(t))
        u = float(self.control(t))
        return TrajectoryPoint(t=float(t), xc=xc, xc_dot=v, xc_ddot=a, u=u, x0=xc - u)


def _poly5(p: Protocol, t):
    d, tf = p.spec.distance, p.spec.duration
    s = t / tf
    xc = d * s**3 * (10.0 - 15.0 * s + 6.0 * s**2)
    v = d / tf * 30.0 * s**2 * (1.0 - s) ** 2
    a = d / tf**2 * 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s)
    return xc, v, a


def _cubic(p: Protocol, t):
    d, tf = p.spec.distance, p.spec.duration
    s = t / tf
    return d * s**2 * (3.0 - 2.0 * s), d / tf * 6.0 * s * (1.0 - s), d / tf**2 * (6.0 - 12.0 * s)


def _unbounded(p: Protocol, t):
    d, tf = p.spec.distance, p.spec.duration
    s = t / tf
    r = np.cbrt(1.0 - 2.0 * s)
    xc = 3.0 * d / 8.0 * r**7 + 7.0 * d / 4.0 * s - 3.0 * d / 8.0
    v = 7.0 * d / (4.0 * tf) * (1.0 - r**4)
    a = 14.0 * d / (3.0 * tf**2) * r
    return xc, v, a


def _bounded(p: Protocol, t):
    d, tf, w0, delta = p.spec.distance, p.spec.duration, p.spec.omega0, p.spec.bound
    c = p.constants
    k = w0**2 * delta
    r = np.cbrt(t - tf / 2)
    c1r = np.cbrt(c.c1)
    first = t <= c.t1
    last = t >= c.t1 + c.t2
    xc = np.where(
        first,
        0.5 * k * t**2,
        np.where(last, d - 0.5 * k * (t - tf) ** 2, -9.0 * w0**2 / 28.0 * c1r * r**7 + c.c3 * t + c.c4),
    )
    v = np.where(first, k * t, np.where(last, -k * (t - tf), -0.75 * w0**2 * c1r * r**4 + c.c3))
    a = np.where(first, k, np.where(last, -k, -(w0**2) * c1r * r))
    return xc, v, a


_KINEMATICS = {
    ProtocolKind.POLYNOMIAL5: _poly5,
    ProtocolKind.CUBIC_MIN_HARMONIC: _cubic,
    ProtocolKind.UNBOUNDED_OPTIMAL: _unbounded,
    ProtocolKind.BOUNDED_OPTIMAL: _bounded,
}


def build_protocol(spec: ProtocolSpec, constants: Optional[BoundedConstants] = None) -> Protocol:
    if spec.kind is ProtocolKind.BOUNDED_OPTIMAL and constants is None:
        constants = bounded_constants(spec)
    return Protocol(spec, constants)


def _require(spec: ProtocolSpec, kind: ProtocolKind):
    if spec.kind is not kind:
        raise DomainError(f"expected a {kind.value} protocol, got {spec.kind.value}")


def polynomial_xc(t: float, spec: ProtocolSpec) -> TrajectoryPoint:
    _require(spec, ProtocolKind.POLYNOMIAL5)
    return Protocol(spec).point(t)


def cubic_xc(t: float, spec: ProtocolSpec) -> TrajectoryPoint:
    _require(spec, ProtocolKind.CUBIC_MIN_HARMONIC)
    return Protocol(spec).point(t)


def unbounded_xc(t: float, spec: ProtocolSpec) -> TrajectoryPoint:
    _require(spec, ProtocolKind.UNBOUNDED_OPTIMAL)
    return Protocol(spec).point(t)


def bounded_xc(t: float, spec: ProtocolSpec, consts: BoundedConstants) -> TrajectoryPoint:
    _require(spec, ProtocolKind.BOUNDED_OPTIMAL)
    return Protocol(spec, consts).point(t)


def unbounded_control(t, spec: ProtocolSpec):
    """``delta0 * cbrt(2 t/tf - 1)`` inside ``(0, tf)``, zero outside."""
    t = np.asarray(t, dtype=float)
    tf = spec.duration
    u = spec.delta_star * np.cbrt(2.0 * t / tf - 1.0)
    u = np.where((t > 0) & (t < tf), u, 0.0)
    return u if u.ndim else float(u)


def control_and_trap_path(t, spec: ProtocolSpec, consts: Optional[BoundedConstants] = None):
    """Return ``(u, x0)``; outside ``[0, tf]`` the trap rests at 0 or d."""
    if spec.kind is ProtocolKind.BOUNDED_OPTIMAL and consts is None:
        raise DomainError("bounded protocol needs BoundedConstants to evaluate its control")
    proto = Protocol(spec, consts)
    t = np.asarray(t, dtype=float)
    u = np.asarray(proto.control(t))
    xc, _, _ = proto.kinematics(np.clip(t, 0.0, spec.duration))
    x0 = xc - u
    if u.ndim == 0:
        return float(u), float(x0)
    return u, x0


def feasibility(spec: ProtocolSpec, trap=None, constants=None) -> FeasibilityReport:
    """Feasibility interval of the bounded optimum for ``spec``.

    Uses ``spec.bound`` when given and ``delta0`` otherwise. ``quartic_dominance_threshold``
    is filled in when a trap is supplied.
    """
    d, tf, w0 = spec.distance, spec.duration, spec.omega0
    delta = spec.bound if spec.bound is not None else spec.delta_star
    if delta <= spec.delta_min:
        verdict = Verdict.INFEASIBLE
    elif delta > spec.delta_star * (1 + 1e-12):
        verdict = Verdict.BOUND_INACTIVE
    else:
        verdict = Verdict.FEASIBLE
    threshold = None
    if trap is not None:
        from .energetics import quartic_dominance_threshold
        from .trap_model import PhysicalConstants

        threshold = quartic_dominance_threshold(0, trap, constants or PhysicalConstants())
    return FeasibilityReport(
        delta=delta,
        delta_min=spec.delta_min,
        delta_star=spec.delta_star,
        tf=tf,
        tf_min=2.0 / w0 * math.sqrt(d / delta),
        tf_star=math.sqrt(14.0 * d / (3.0 * delta)) / w0,
        quartic_dominance_threshold=threshold,
        verdict=verdict,
    )


@dataclass(frozen=True)
class TrajectoryTable:
    protocol: ProtocolSpec
    t: np.ndarray
    xc: np.ndarray
    xc_dot: np.ndarray
    xc_ddot: np.ndarray
    u: np.ndarray
    x0: np.ndarray
    constants: Optional[BoundedConstants] = None

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0):
            raise DomainError("table times must be strictly increasing")

    def __len__(self):
        return len(self.t)

    @property
    def source(self) -> Protocol:
        return Protocol(self.protocol, self.constants)

    @property
    def points(self) -> List[TrajectoryPoint]:
        return [
            TrajectoryPoint(*(float(c[i]) for c in (self.t, self.xc, self.xc_dot, self.xc_ddot, self.u, self.x0)))
            for i in range(len(self.t))
        ]


def sample_protocol(
    spec: ProtocolSpec, n: int = DEFAULT_SAMPLES, constants: Optional[BoundedConstants] = None
) -> TrajectoryTable:
    """Uniform samples on ``[0, tf]``; the end samples sit ``tf * 1e-9`` inside
    so the one-sided control limits are representable."""
    if n < 3:
        raise DomainError("need at least 3 samples")
    proto = build_protocol(spec, constants)
    tf = spec.duration
    t = np.linspace(0.0, tf, n)
    t[0] = EDGE_OFFSET * tf
    t[-1] = tf - EDGE_OFFSET * tf
    xc, v, a = proto.kinematics(t)
    u = np.asarray(proto.control(t))
    return TrajectoryTable(spec, t, xc, v, a, u, xc - u, proto.constants)


def verify_euler_lagrange(table: TrajectoryTable) -> float:
    """Deviation of ``xc_ddot**3`` from its best affine fit, in units of ``(d/tf^2)^3``.

    The minimizers of ``int xc_ddot^4 dt`` satisfy ``d^2/dt^2 (xc_ddot^3) = 0``.
    Only interior samples are used.
    """
    t = table.t[1:-1]
    if len(t) < 4:
        raise DomainError("need at least 4 interior samples")
    spec = table.protocol
    scale = spec.distance / spec.duration**2
    y = (table.xc_ddot[1:-1] / scale) ** 3
    s = t / spec.duration
    design = np.column_stack([np.ones_like(s), s])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(np.max(np.abs(y - design @ coef)))


def _trapezoid_weights(t: np.ndarray) -> np.ndarray:
    dt = np.diff(t)
    w = np.zeros_like(t)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w


@dataclass
class AdmissibleControls:
    """Discretized controls sharing one grid and trapezoid weights."""

    t: np.ndarray
    weights: np.ndarray
    optimal: np.ndarray
    perturbed: List[np.ndarray] = field(default_factory=list)

    def moments(self, u: np.ndarray) -> Tuple[float, float]:
        """``(int u dt, int t u dt)``; fixing both fixes x_c(tf) and its velocity."""
        return float(np.sum(self.weights * u)), float(np.sum(self.weights * self.t * u))


def random_admissible_controls(
    protocol: Protocol, count: int, rng: np.random.Generator, n_grid: int = 4001, modes: int = 8
) -> AdmissibleControls:
    """Perturb the bounded optimum into other controls with the same endpoints.

    Every perturbation keeps ``|u| <= delta`` and both moments ``int u`` and
    ``int t u`` (discretely, on the returned weights), so the atom still ends
    at rest at ``d``. Saturated arcs are only pushed inward.
    """
    spec = protocol.spec
    if spec.kind is not ProtocolKind.BOUNDED_OPTIMAL:
        raise DomainError("admissible perturbations are built around the bounded optimum")
    tf, delta = spec.duration, spec.bound
    c = protocol.constants
    t = np.linspace(0.0, tf, n_grid)
    w = _trapezoid_weights(t)
    inner = np.clip(t, EDGE_OFFSET * tf, tf - EDGE_OFFSET * tf)
    u_opt = np.asarray(protocol.control(inner))
    a, b = c.t1, c.t1 + c.t2
    interior = (t > a) & (t < b)
    window = np.where(interior, (t - a) * (b - t), 0.0)
    window /= window.max()
    first = t < a
    last = t > b
    out = AdmissibleControls(t=t, weights=w, optimal=u_opt)
    basis = np.column_stack([window, window * t])
    gram = np.array([[np.sum(w * basis[:, i] * m) for i in range(2)] for m in (np.ones_like(t), t)])
    while len(out.perturbed) < count:
        h = np.zeros_like(t)
        phase = (t - a) / (b - a)
        for k in range(1, modes + 1):
            h += rng.normal() / k * np.sin(k * np.pi * phase) * interior
        if a > 0:
            h += rng.uniform(0.0, 2.0) * np.where(first, np.sin(np.pi * t / a) ** 2, 0.0)
            h -= rng.uniform(0.0, 2.0) * np.where(last, np.sin(np.pi * (tf - t) / a) ** 2, 0.0)
        h *= delta
        rhs = np.array([np.sum(w * h), np.sum(w * t * h)])
        alpha = np.linalg.solve(gram, rhs)
        h -= basis @ alpha
        up = h > 0
        down = h < 0
        limits = np.concatenate([(delta - u_opt[up]) / h[up], (-delta - u_opt[down]) / h[down]])
        s_max = float(np.min(limits)) if limits.size else 1.0
        if not s_max > 0:
            continue
        s = min(s_max, 1.0) * rng.uniform(0.1, 1.0)
        out.perturbed.append(u_opt + s * h)
    return out
