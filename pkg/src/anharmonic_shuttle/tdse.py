"""Split-operator propagation of a single atom through a transport protocol.

By default the grid rides on the classical trajectory x_c(t) with a
velocity-boost gauge (``Frame.COMOVING``). Writing
``psi(x, t) = exp(i m xc_dot x / hbar) phi(x - x_c, t)`` up to a global phase,
``phi`` evolves under

    H' = p^2/2m + V(q + x_c - x_0) + m xc_ddot q

which for a harmonic trap is exactly ``p^2/2m + m w0^2 q^2 / 2``: ideal
transport is stationary and a micrometre grid suffices for a centimetre
shuttle. ``Frame.LAB`` propagates in fixed coordinates and is only practical
for short distances; it exists to cross-check the frame change.

With ``compensate`` the protocol's x_c(t) curve is used as the trap path and
the linear term ``-m x x0_ddot`` cancels the inertial force, so the trap
carries the atom rigidly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .trajectory import Protocol, ProtocolSpec, TrajectoryTable, build_protocol
from .trap_model import (
    ConfigurationError,
    PhysicalConstants,
    PotentialKind,
    TrapSpec,
    potential_value,
)

EDGE_POINTS = 5
EDGE_PROBABILITY = 1e-10
STEPS_PER_PERIOD = 2048
# largest norm change a single unitary step may show from round-off alone
MAX_STEP_NORM_DRIFT = 1e-13


class WindowOverflowError(RuntimeError):
    """The wavepacket reached the edge of the grid."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to converge."""


class Frame(str, enum.Enum):
    LAB = "lab"
    COMOVING = "comoving"


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid ``q = -L, -L + dq, ..., L - dq``.

    In the lab frame ``center`` is the lab position of ``q = 0``.
    """

    n_points: int
    half_width: float
    dt: float
    frame: Frame = Frame.COMOVING
    center: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "frame", Frame(self.frame))
        n = self.n_points
        if n < 256 or n & (n - 1):
            raise ConfigurationError(f"n_points must be a power of two >= 256, got {n}")
        if not self.half_width > 0 or not self.dt > 0:
            raise ConfigurationError("half_width and dt must be positive")

    @property
    def dq(self) -> float:
        return 2.0 * self.half_width / self.n_points

    @property
    def q(self) -> np.ndarray:
        return -self.half_width + self.dq * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dq)

    def check_resolution(self, trap: TrapSpec, consts: PhysicalConstants = PhysicalConstants()):
        sigma = trap.oscillator_length(consts.hbar)
        if self.dq > sigma / 8:
            raise ConfigurationError(
                f"grid spacing {self.dq:.3e} m does not resolve the ground state (needs <= sigma/8 = {sigma / 8:.3e} m)"
            )

    def same_space(self, other: "GridSpec") -> bool:
        return (
            self.n_points == other.n_points
            and self.half_width == other.half_width
            and self.frame == other.frame
            and self.center == other.center
        )


def default_grid(
    trap: TrapSpec,
    consts: PhysicalConstants = PhysicalConstants(),
    n_points: int = 4096,
    half_width: Optional[float] = None,
    dt: Optional[float] = None,
) -> GridSpec:
    """Co-moving grid of half-width 64 sigma with 2048 steps per trap period."""
    sigma = trap.oscillator_length(consts.hbar)
    return GridSpec(
        n_points=n_points,
        half_width=64.0 * sigma if half_width is None else half_width,
        dt=2.0 * math.pi / (trap.omega0 * STEPS_PER_PERIOD) if dt is None else dt,
    )


@dataclass(frozen=True)
class Wavefunction:
    grid: GridSpec
    amplitudes: np.ndarray
    t: float = 0.0

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dq)

    def normalized(self) -> "Wavefunction":
        return replace(self, amplitudes=self.amplitudes / math.sqrt(self.norm()))

    def edge_probability(self) -> float:
        p = np.abs(self.amplitudes) ** 2
        return float((p[:EDGE_POINTS].sum() + p[-EDGE_POINTS:].sum()) * self.grid.dq)


@dataclass(frozen=True)
class PropagationConfig:
    kind: PotentialKind
    protocol: ProtocolSpec
    compensate: bool = False
    mode_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", PotentialKind(self.kind))
        if self.mode_index != 0:
            raise ConfigurationError("transport runs are implemented for the ground mode only")


def _hermite_function(n: int, xi: np.ndarray) -> np.ndarray:
    """Normalized Hermite function of order n via the stable three-term recurrence."""
    prev = np.zeros_like(xi)
    cur = np.pi**-0.25 * np.exp(-0.5 * xi**2)
    for k in range(n):
        prev, cur = cur, math.sqrt(2.0 / (k + 1)) * xi * cur - math.sqrt(k / (k + 1)) * prev
    return cur


def ho_eigenstate(
    n: int,
    grid: GridSpec,
    trap: TrapSpec,
    consts: PhysicalConstants = PhysicalConstants(),
    center: float = 0.0,
    momentum: float = 0.0,
) -> Wavefunction:
    """Harmonic-oscillator eigenstate ``n`` centered at grid coordinate ``center``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    sigma = trap.oscillator_length(consts.hbar)
    turning = sigma * math.sqrt(2 * n + 1)
    if abs(center) + turning >= 0.8 * grid.half_width:
        raise ConfigurationError(
            f"state n={n} at {center:.3e} m does not fit the window of half-width {grid.half_width:.3e} m"
        )
    q = grid.q
    psi = _hermite_function(n, (q - center) / sigma).astype(complex) / math.sqrt(sigma)
    if momentum:
        psi *= np.exp(1j * momentum * (q + grid.center) / consts.hbar)
    return Wavefunction(grid, psi).normalized()


def _protocol(source) -> Protocol:
    if isinstance(source, TrajectoryTable):
        return source.source
    if isinstance(source, ProtocolSpec):
        return build_protocol(source)
    return source


def transport_mode(
    n: int, t: float, source, grid: GridSpec, trap: TrapSpec, consts: PhysicalConstants = PhysicalConstants()
) -> Wavefunction:
    """Ideal harmonic transport mode at time ``t`` in the grid's frame.

    The global Lewis-Riesenfeld phase ``int (lambda_n + m xc_dot^2/2) dt`` with
    ``lambda_n = (n + 1/2) hbar w0`` is left out; it does not change fidelities.
    """
    if grid.frame is Frame.COMOVING:
        return replace(ho_eigenstate(n, grid, trap, consts), t=t)
    xc, v, _ = (float(z) for z in _protocol(source).kinematics(t))
    psi = ho_eigenstate(n, grid, trap, consts, center=xc - grid.center, momentum=trap.mass * v)
    return replace(psi, t=t)


def fidelity(a: Wavefunction, b: Wavefunction) -> float:
    """``|<a|b>|`` on a shared grid."""
    if not a.grid.same_space(b.grid):
        raise ConfigurationError("fidelity needs both states on the same grid")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) * a.grid.dq)


def _frame_path(proto: Protocol, compensate: bool, times: np.ndarray):
    """Return ``(xc, xc_ddot, trap_center, compensation_accel)`` at ``times``."""
    xc, _, a = proto.kinematics(times)
    if compensate:
        return xc, a, xc, a
    return xc, a, xc - np.asarray(proto.control(times)), np.zeros_like(a)


def _frame_potential(kind, trap, grid, xc, a, trap_center, comp_accel, q=None):
    """Potential felt on the grid, shifted so that it vanishes at q = 0."""
    q = grid.q if q is None else q
    if grid.frame is Frame.COMOVING:
        s = xc - trap_center
        if kind is not PotentialKind.GAUSSIAN_MATCHED:
            # expand V(q + s) - V(s) in q so the large linear terms cancel in scalars
            eta = trap.eta if kind is PotentialKind.HARMONIC_PLUS_QUARTIC else 0.0
            c1 = trap.stiffness * s - 4.0 * eta * s**3 + trap.mass * (a - comp_accel)
            c2 = 0.5 * trap.stiffness - 6.0 * eta * s * s
            c3 = -4.0 * eta * s
            return q * (c1 + q * (c2 + q * (c3 - eta * q)))
        v = potential_value(kind, trap, q + s) + trap.mass * (a - comp_accel) * q
    else:
        x = q + grid.center
        v = potential_value(kind, trap, x - trap_center) - trap.mass * comp_accel * x
    return v - v[grid.n_points // 2]


def _max_potential_argument(grid: GridSpec, proto: Protocol, compensate: bool) -> float:
    t = np.linspace(0.0, proto.duration, 2049)[1:-1]
    if compensate:
        offset = 0.0 if grid.frame is Frame.COMOVING else float(np.max(np.abs(grid.center - proto.kinematics(t)[0])))
    elif grid.frame is Frame.COMOVING:
        offset = float(np.max(np.abs(proto.control(t))))
    else:
        x0 = proto.kinematics(t)[0] - proto.control(t)
        offset = float(np.max(np.abs(grid.center - x0)))
    return grid.half_width + offset


def _check_window(psi: np.ndarray, grid: GridSpec, t: float):
    p = np.abs(psi) ** 2
    edge = float((p[:EDGE_POINTS].sum() + p[-EDGE_POINTS:].sum()) * grid.dq)
    if edge > EDGE_PROBABILITY:
        raise WindowOverflowError(f"probability {edge:.2e} within {EDGE_POINTS} points of the window edge at t={t:.6g} s")


def propagate(
    initial: Wavefunction,
    config: PropagationConfig,
    source,
    trap: TrapSpec,
    consts: PhysicalConstants = PhysicalConstants(),
    reverse: bool = False,
    observer: Optional[Callable[[Wavefunction], None]] = None,
    observe_every: int = 0,
) -> Wavefunction:
    """Strang-split propagation over ``[0, tf]`` (or back from tf to 0 with ``reverse``).

    Each step is ``K(dt/2) V(t_mid) K(dt/2)`` with the potential sampled at the
    step midpoint, so the jumps of u at 0 and tf act as sudden potential
    changes between steps.
    """
    grid = initial.grid
    proto = _protocol(source)
    kind = config.kind
    tf = proto.duration
    hbar = consts.hbar
    if kind is PotentialKind.HARMONIC_PLUS_QUARTIC and trap.eta > 0:
        reach = _max_potential_argument(grid, proto, config.compensate)
        if reach >= trap.rayleigh:
            raise ConfigurationError(
                f"quartic potential is not trap-like over the window: reach {reach:.3e} m >= {trap.rayleigh:.3e} m"
            )
    n_steps = max(1, math.ceil(tf / grid.dt - 1e-9))
    dt = tf / n_steps
    if reverse:
        times = tf - (np.arange(n_steps) + 0.5) * dt
        dt = -dt
    else:
        times = (np.arange(n_steps) + 0.5) * dt
    path = _frame_path(proto, config.compensate, times)
    q = grid.q
    kinetic = hbar * grid.k**2 / (2.0 * trap.mass)
    half_kinetic = np.exp(-0.5j * kinetic * dt)
    full_kinetic = np.exp(-1j * kinetic * dt)
    phase = dt / hbar
    norm0 = np.vdot(initial.amplitudes, initial.amplitudes).real
    psi = np.fft.fft(initial.amplitudes) * half_kinetic
    check_every = 64
    for j, t in enumerate(times):
        x = np.fft.ifft(psi)
        # the steps are unitary; only FFT round-off (~1e-16 per transform) moves
        # the norm, and it drifts systematically, so undo it every step
        drift = np.vdot(x, x).real / norm0
        if abs(drift - 1.0) > MAX_STEP_NORM_DRIFT:
            raise NumericalError(f"norm changed by {drift - 1.0:.2e} in one step at t={t:.6g} s")
        v = _frame_potential(kind, trap, grid, *(c[j] for c in path), q=q)
        x *= np.exp(-1j * phase * v) / math.sqrt(drift)
        psi = np.fft.fft(x)
        if (j + 1) % check_every == 0:
            _check_window(x, grid, float(t))
        if observer is not None and observe_every and (j + 1) % observe_every == 0:
            observer(Wavefunction(grid, np.fft.ifft(psi * half_kinetic), float(t) + 0.5 * dt))
        psi *= full_kinetic if j < n_steps - 1 else half_kinetic
    out = np.fft.ifft(psi)
    out *= math.sqrt(norm0 / np.vdot(out, out).real)
    t_end = 0.0 if reverse else tf
    _check_window(out, grid, t_end)
    return Wavefunction(grid, out, t_end)


def kinetic_energy(psi: Wavefunction, mass: float, consts: PhysicalConstants = PhysicalConstants()) -> float:
    pk = np.abs(np.fft.fft(psi.amplitudes)) ** 2
    return float(np.sum(pk * (consts.hbar * psi.grid.k) ** 2 / (2.0 * mass)) / np.sum(pk) * psi.norm())


def potential_energy(psi: Wavefunction, v: np.ndarray) -> float:
    return float(np.sum(np.abs(psi.amplitudes) ** 2 * v) * psi.grid.dq)


def excitation_energy(
    psi: Wavefunction, trap: TrapSpec, consts: PhysicalConstants = PhysicalConstants(), center: float = 0.0
) -> float:
    """Harmonic energy above the zero-point energy, kinetic part evaluated spectrally."""
    v = 0.5 * trap.stiffness * (psi.grid.q - center) ** 2
    return kinetic_energy(psi, trap.mass, consts) + potential_energy(psi, v) - 0.5 * consts.hbar * trap.omega0


def imaginary_time_ground_state(
    kind: PotentialKind,
    grid: GridSpec,
    trap: TrapSpec,
    consts: PhysicalConstants = PhysicalConstants(),
    tol: float = 1e-14,
    max_steps: int = 200_000,
) -> Wavefunction:
    """Lowest state of the static trap by imaginary-time Strang splitting.

    Runs a schedule of shrinking steps (w0 dtau = 0.1, 0.01, 0.001) so the
    splitting bias of the fixed point is negligible; each stage stops once
    the energy changes by less than ``tol * hbar w0`` per step.
    """
    kind = PotentialKind(kind)
    hbar, m, w0 = consts.hbar, trap.mass, trap.omega0
    v = potential_value(kind, trap, grid.q)
    if kind is PotentialKind.HARMONIC_PLUS_QUARTIC and grid.half_width >= trap.rayleigh:
        raise ConfigurationError("quartic potential is unbounded below on this window")
    kin = hbar**2 * grid.k**2 / (2.0 * m)
    psi = ho_eigenstate(0, grid, trap, consts).amplitudes
    unit = hbar * w0
    steps = 0
    for wdtau, stage_tol in ((0.1, 1e-8), (0.01, 1e-11), (0.001, tol)):
        tau = wdtau / w0
        half_v = np.exp(-0.5 * v * tau / hbar)
        full_k = np.exp(-kin * tau / hbar)
        energy = math.inf
        while True:
            psi = half_v * np.fft.ifft(full_k * np.fft.fft(half_v * psi))
            psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * grid.dq)
            state = Wavefunction(grid, psi)
            new = kinetic_energy(state, m, consts) + potential_energy(state, v)
            steps += 1
            if abs(new - energy) < stage_tol * unit:
                break
            energy = new
            if steps > max_steps:
                raise NumericalError(f"imaginary-time relaxation did not converge in {max_steps} steps")
    return Wavefunction(grid, psi).normalized()


def state_energy(psi: Wavefunction, kind: PotentialKind, trap: TrapSpec, consts: PhysicalConstants = PhysicalConstants()) -> float:
    return kinetic_energy(psi, trap.mass, consts) + potential_energy(psi, potential_value(kind, trap, psi.grid.q))


@dataclass(frozen=True)
class TransportResult:
    fidelity: float
    excitation: float
    converged: bool
    fidelity_change: float
    grid: GridSpec
    final: Wavefunction


def _single_run(config, proto, trap, consts, grid, initial):
    if initial == "harmonic":
        start = ho_eigenstate(0, grid, trap, consts)
    elif initial == "anharmonic":
        start = imaginary_time_ground_state(config.kind, grid, trap, consts)
    else:
        raise ConfigurationError(f"unknown initial state {initial!r}")
    final = propagate(start, config, proto, trap, consts)
    target = transport_mode(0, proto.duration, proto, grid, trap, consts)
    center = 0.0 if grid.frame is Frame.COMOVING else proto.spec.distance - grid.center
    return fidelity(target, final), excitation_energy(final, trap, consts, center), final


def run_transport(
    config: PropagationConfig,
    trap: TrapSpec,
    consts: PhysicalConstants = PhysicalConstants(),
    grid: Optional[GridSpec] = None,
    initial: str = "harmonic",
    tol: float = 1e-8,
    max_halvings: int = 4,
) -> TransportResult:
    """Propagate and report fidelity against the ideal transport mode.

    The run is repeated with twice the points and half the step. If the
    fidelity moves by ``tol`` or more, the step is cut by the power of two
    that second-order splitting predicts to be enough (the change scales as
    dt^2) and the pair is rerun, up to ``max_halvings`` halvings in total.
    The finer run of the last pair is reported.
    """
    proto = build_protocol(config.protocol)
    grid = grid or default_grid(trap, consts)
    grid.check_resolution(trap, consts)
    halvings = 0
    coarse = _single_run(config, proto, trap, consts, grid, initial)
    while True:
        fine_grid = replace(grid, n_points=2 * grid.n_points, dt=grid.dt / 2)
        fine = _single_run(config, proto, trap, consts, fine_grid, initial)
        change = abs(fine[0] - coarse[0])
        if change < tol:
            return TransportResult(fine[0], fine[1], True, change, fine_grid, fine[2])
        if halvings >= max_halvings:
            return TransportResult(fine[0], fine[1], False, change, fine_grid, fine[2])
        # aim for a quarter of the tolerance
        wanted = max(1, math.ceil(0.5 * math.log2(4.0 * change / tol)))
        step = min(wanted, max_halvings - halvings)
        halvings += step
        grid = replace(grid, dt=grid.dt / 2**step)
        coarse = _single_run(config, proto, trap, consts, grid, initial)
