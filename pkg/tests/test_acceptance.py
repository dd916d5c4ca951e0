"""Acceptance suite.

Each test checks one numbered criterion at its stated tolerance and prints a
single ``PASS``/``FAIL criterion N: ...`` line.  Run with ``-s`` or as a script
to see the lines interleaved with pytest output.
"""

import math
import sys
import time

import numpy as np
import pytest

from anharmonic_shuttle.energetics import (
    MIN_ENERGY_CONSTANTS,
    anharmonic_avg_quadrature,
    bounded_energy_closed_form,
    cost_functional,
    harmonic_avg_quadrature,
    quartic_dominance_threshold,
)
from anharmonic_shuttle.quadrature import integrate
from anharmonic_shuttle.tdse import (
    PropagationConfig,
    default_grid,
    fidelity,
    ho_eigenstate,
    propagate,
    run_transport,
)
from anharmonic_shuttle.trajectory import (
    ProtocolSpec,
    build_protocol,
    feasibility,
    random_admissible_controls,
    sample_protocol,
    unbounded_control,
    verify_euler_lagrange,
)
from anharmonic_shuttle.trap_model import reference_trap

TRAP = reference_trap()
W0, D, ETA, M = TRAP.omega0, TRAP.distance, TRAP.eta, TRAP.mass
TF = 0.052
DELTA = 0.89 * 14 * D / (3 * W0**2 * TF**2)
TF_MIN = feasibility(ProtocolSpec("bounded", D, TF, W0, DELTA)).tf_min


@pytest.fixture
def report(capsys):
    def emit(number: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}", flush=True)
        assert ok, detail

    return emit


def spec(kind, tf=TF, bound=None):
    return ProtocolSpec(kind, D, tf, W0, bound)


def test_criterion_01_bounded_closed_form(report):
    rng = np.random.default_rng(20)
    worst = 0.0
    start = time.perf_counter()
    for _ in range(50):
        tf = rng.uniform(0.03, 0.5)
        d0 = 14 * D / (3 * W0**2 * tf**2)
        delta = d0 * rng.uniform(6 / 7 + 1e-6, 1.0)
        closed = ETA * delta**4 * (1 - 4 * math.sqrt(7) / 7 * math.sqrt(1 - 4 * D / (W0**2 * tf**2 * delta)))
        quad = anharmonic_avg_quadrature(build_protocol(spec("bounded", tf, delta)), TRAP)
        worst = max(worst, abs(quad / closed - 1))
        assert bounded_energy_closed_form(delta, D, tf, W0, ETA) == pytest.approx(closed, rel=1e-12)
    elapsed = time.perf_counter() - start
    report(1, worst < 1e-8 and elapsed < 10, f"max rel err {worst:.2e} over 50 pairs in {elapsed:.2f} s")


def test_criterion_02_cubic_constants(report):
    errs = []
    for tf in (0.05, 0.11, 0.3):
        p = build_protocol(spec("cubic", tf))
        errs.append(abs(anharmonic_avg_quadrature(p, TRAP) / (1296 * ETA * D**4 / (5 * W0**8 * tf**8)) - 1))
        errs.append(abs(harmonic_avg_quadrature(p, TRAP) / (6 * M * D**2 / (W0**2 * tf**4)) - 1))
    report(2, max(errs) < 1e-10, f"max rel err {max(errs):.2e}")


def test_criterion_03_unbounded_constant(report):
    p = build_protocol(spec("unbounded"))
    d0 = p.spec.delta_star
    quad = anharmonic_avg_quadrature(p, TRAP)
    mean = integrate(lambda s: np.abs(2 * s - 1) ** (4 / 3), (0.0, 0.5, 1.0), singular=(0.5,)).value
    err_quad = abs(quad / (3 / 7 * ETA * d0**4) - 1)
    err_mean = abs(mean / (3 / 7) - 1)
    limit = bounded_energy_closed_form(d0, D, TF, W0, ETA)
    published = MIN_ENERGY_CONSTANTS["published"] * ETA * D**4 / (W0**8 * TF**8)
    factor = limit / published
    flagged = abs(factor - 14 / 3) < 1e-10
    report(
        3,
        err_quad < 1e-10 and err_mean < 1e-10 and flagged,
        f"rel err {err_quad:.2e} (mean of |2s-1|^(4/3): {err_mean:.2e}); published 392/9 low by {factor:.12g}",
    )


def test_criterion_04_scaling_exponent(report):
    tfs = np.geomspace(0.05, 0.5, 12)
    e = [anharmonic_avg_quadrature(build_protocol(spec("unbounded", tf)), TRAP) for tf in tfs]
    slope = np.polyfit(np.log(tfs), np.log(e), 1)[0]
    report(4, abs(slope + 8) <= 0.01, f"fitted exponent {slope:.6f}")


def test_criterion_05_euler_lagrange(report):
    res = {k: verify_euler_lagrange(sample_protocol(spec(k, bound=DELTA if k == "bounded" else None))) for k in ("unbounded", "polynomial5", "cubic", "bounded")}
    ok = res["unbounded"] < 1e-10 and all(v > 0 for k, v in res.items() if k != "unbounded")
    report(5, ok, ", ".join(f"{k} {v:.2e}" for k, v in res.items()))


def test_criterion_06_degeneration(report):
    d0 = spec("unbounded").delta_star
    s = spec("bounded", bound=(1 - 1e-6) * d0)
    t = np.linspace(0, TF, 20001)[1:-1]
    gap = np.max(np.abs(build_protocol(s).control(t) - unbounded_control(t, spec("unbounded"))))
    report(6, gap < 1e-3 * d0, f"sup |u_b - u_unb| = {gap / d0:.2e} delta0")


def test_criterion_07_dominance(report):
    costs = {k: cost_functional(build_protocol(spec(k))) for k in ("unbounded", "polynomial5", "cubic")}
    ordered = costs["unbounded"] < costs["polynomial5"] and costs["unbounded"] < costs["cubic"]
    ctl = random_admissible_controls(build_protocol(spec("bounded", bound=DELTA)), 100, np.random.default_rng(7))
    best = np.sum(ctl.weights * ctl.optimal**4)
    others = np.array([np.sum(ctl.weights * u**4) for u in ctl.perturbed])
    beaten = len(others) == 100 and bool(np.all(best <= others))
    report(
        7,
        ordered and beaten,
        f"poly5/unb {costs['polynomial5'] / costs['unbounded']:.4f}, cubic/unb {costs['cubic'] / costs['unbounded']:.4f}, "
        f"min random/bounded {others.min() / best:.6f} over {len(others)} controls",
    )


@pytest.mark.parametrize("kind", ["polynomial5", "cubic", "unbounded", "bounded"])
def test_criterion_08_harmonic_exactness(report, kind):
    start = time.perf_counter()
    res = run_transport(PropagationConfig("harmonic", spec(kind, bound=DELTA if kind == "bounded" else None)), TRAP)
    elapsed = time.perf_counter() - start
    ok = res.converged and res.fidelity >= 1 - 1e-6 and elapsed < 60
    report(8, ok, f"{kind}: 1-F = {1 - res.fidelity:.2e}, converged={res.converged}, {elapsed:.1f} s")


def test_criterion_09_compensated_transport(report):
    res = run_transport(PropagationConfig("quartic", spec("polynomial5"), compensate=True), TRAP)
    report(9, res.converged and res.fidelity >= 1 - 1e-4, f"1-F = {1 - res.fidelity:.2e}, converged={res.converged}")


SWEEP = (0.052, 0.06, 0.08, 2 * TF_MIN, 0.12, 0.15, 0.2)


def test_criterion_10_gaussian_vs_quartic(report):
    fq = {}
    lines = []
    ok = True
    for tf in SWEEP:
        res = run_transport(PropagationConfig("quartic", spec("unbounded", tf)), TRAP)
        ok &= res.converged
        fq[tf] = res.fidelity
        lines.append(f"F({tf:.4g})={res.fidelity:.6g}")
    gauss = run_transport(PropagationConfig("gaussian", spec("unbounded")), TRAP)
    ok &= gauss.converged
    gap = abs(gauss.fidelity - fq[TF])
    f = np.array([fq[tf] for tf in SWEEP])
    monotone = bool(np.all(np.diff(f) > 0))
    high = all(fq[tf] > 0.99 for tf in SWEEP if tf >= 2 * TF_MIN)
    ok = ok and gap < 1e-3 and monotone and high
    report(
        10,
        ok,
        f"|F_G - F_Q| = {gap:.2e} at {TF} s; monotone={monotone}; F > 0.99 for tf >= 2 tf_min ({2 * TF_MIN:.5g} s): {high}; "
        + " ".join(lines),
    )


def test_criterion_11_dominance_threshold(report):
    t = quartic_dominance_threshold(0, TRAP)
    report(11, abs(t / 0.389 - 1) <= 0.05, f"threshold {t:.6g} s")


def test_criterion_12_propagator_health(report):
    tf = 0.12
    cfg = PropagationConfig("quartic", spec("unbounded", tf))
    grid = default_grid(TRAP)
    start = ho_eigenstate(0, grid, TRAP)
    forward = propagate(start, cfg, cfg.protocol, TRAP)
    back = propagate(forward, cfg, cfg.protocol, TRAP, reverse=True)
    drift = max(abs(forward.norm() - 1), abs(back.norm() - 1))
    trip = fidelity(start, back)
    res = run_transport(cfg, TRAP)
    ok = drift < 1e-12 and trip >= 1 - 1e-8 and res.converged and res.fidelity_change < 1e-8
    report(
        12,
        ok,
        f"norm drift {drift:.1e}, round trip 1-F = {1 - trip:.1e}, refinement change {res.fidelity_change:.1e} (F = {res.fidelity:.6g})",
    )


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
