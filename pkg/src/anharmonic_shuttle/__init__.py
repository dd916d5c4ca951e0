"""Minimal-anharmonicity transport of a trapped atom: protocols, energies and wavepacket dynamics."""

from .trap_model import HBAR, RB87_MASS, ConfigurationError, PhysicalConstants, PotentialKind, TrapSpec, TweezerSpec, derive_trap, reference_trap
from .trajectory import ProtocolKind, ProtocolSpec, build_protocol, feasibility, sample_protocol
from .energetics import anharmonic_avg_quadrature, closed_form_avg, harmonic_avg_quadrature, quartic_dominance_threshold
from .tdse import GridSpec, PropagationConfig, TransportResult, run_transport

__all__ = [
    "HBAR",
    "RB87_MASS",
    "ConfigurationError",
    "PhysicalConstants",
    "PotentialKind",
    "TrapSpec",
    "TweezerSpec",
    "derive_trap",
    "reference_trap",
    "ProtocolKind",
    "ProtocolSpec",
    "build_protocol",
    "feasibility",
    "sample_protocol",
    "anharmonic_avg_quadrature",
    "closed_form_avg",
    "harmonic_avg_quadrature",
    "quartic_dominance_threshold",
    "GridSpec",
    "PropagationConfig",
    "TransportResult",
    "run_transport",
]
