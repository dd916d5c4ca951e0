"""Command-line front end: feasibility checks, trajectory design, energy and fidelity sweeps.

Every command reads one config file, writes plot-ready CSV files plus a JSON
summary into ``--out-dir``, and exits with 0 (success), 1 (usage or config
error), 2 (physically infeasible request) or 3 (numerical failure).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import config as cfgmod
from .energetics import (
    anharmonic_avg_quadrature,
    closed_form_avg,
    cost_functional,
    discrete_cost,
    harmonic_avg_quadrature,
)
from .quadrature import QuadratureError
from .tdse import (
    NumericalError,
    PropagationConfig,
    WindowOverflowError,
    ho_eigenstate,
    imaginary_time_ground_state,
    propagate,
    run_transport,
)
from .trajectory import (
    BoundInactiveError,
    DomainError,
    InfeasibleBoundError,
    Verdict,
    build_protocol,
    feasibility,
    random_admissible_controls,
    sample_protocol,
)
from .trap_model import ConfigurationError

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 1, 2, 3

TRAJECTORY_COLUMNS = ("t_s", "xc_m", "xc_dot_mps", "xc_ddot_mps2", "u_m", "x0_m")
ENERGY_COLUMNS = ("tf_s", "protocol", "delta_m", "Ep_avg_J", "Epp_avg_J", "Epp_closed_J", "Epp_over_E0")
FIDELITY_COLUMNS = ("tf_s", "protocol", "kind", "fidelity", "excitation_J", "converged", "status")
SNAPSHOT_COLUMNS = ("t_s", "q_m", "re_psi", "im_psi")

OPTIMALITY_SAMPLES = 100


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


@dataclass
class Run:
    cfg: cfgmod.ScenarioConfig
    out_dir: Path
    threads: int
    seed: int

    def path(self, name: str) -> Path:
        return self.out_dir / f"{self.cfg.output.prefix}{name}"

    def summary(self, command: str, feasibility_report, results, warnings):
        doc = {
            "config_echo": cfgmod.to_mapping(self.cfg),
            "feasibility": feasibility_report,
            "results": results,
            "warnings": warnings,
        }
        with open(self.path(f"{command}_summary.json"), "w", encoding="utf-8") as fh:
            json.dump(_json_safe(doc), fh, indent=2, sort_keys=False)
            fh.write("\n")


def _feasibility(run: Run) -> dict:
    trap = run.cfg.trap_spec()
    spec = run.cfg.protocol_spec("bounded")
    return feasibility(spec, trap).as_dict()


def cmd_check(run: Run) -> int:
    trap = run.cfg.trap_spec()
    spec = run.cfg.protocol_spec("bounded")
    report = feasibility(spec, trap)
    print(f"delta      = {report.delta:.6e} m")
    print(f"delta_min  = {report.delta_min:.6e} m")
    print(f"delta0     = {report.delta_star:.6e} m")
    print(f"tf         = {report.tf:.6g} s")
    print(f"tf_min     = {report.tf_min:.6g} s")
    print(f"tf_star    = {report.tf_star:.6g} s")
    print(f"quartic-dominance threshold = {report.quartic_dominance_threshold:.6g} s")
    print(f"verdict    = {report.verdict.value}")
    warnings, results = [], []
    if report.verdict is Verdict.BOUND_INACTIVE:
        warnings.append("bound exceeds delta0 and is never active; the unbounded optimum applies")
    if report.verdict is Verdict.FEASIBLE:
        results.append(_optimality_check(spec, run.seed))
        print(f"optimality: bounded cost <= {OPTIMALITY_SAMPLES} random admissible controls: {results[-1]['passed']}")
    run.summary("check", report.as_dict(), results, warnings)
    return EXIT_INFEASIBLE if report.verdict is Verdict.INFEASIBLE else EXIT_OK


def _optimality_check(spec, seed: int) -> dict:
    proto = build_protocol(spec)
    controls = random_admissible_controls(proto, OPTIMALITY_SAMPLES, np.random.default_rng(seed))
    best = discrete_cost(controls.weights, controls.optimal)
    others = [discrete_cost(controls.weights, u) for u in controls.perturbed]
    return {
        "check": "optimality",
        "seed": seed,
        "samples": OPTIMALITY_SAMPLES,
        "optimal_cost": best,
        "min_perturbed_cost": min(others),
        "passed": bool(best <= min(others)),
    }


def cmd_design(run: Run) -> int:
    results, warnings = [], []
    status = EXIT_OK
    for name in run.cfg.sweep.protocols:
        try:
            spec = run.cfg.protocol_spec(name)
            table = sample_protocol(spec, run.cfg.output.samples)
        except (InfeasibleBoundError, BoundInactiveError) as exc:
            warnings.append(f"{name}: {exc}")
            status = EXIT_INFEASIBLE
            continue
        path = run.path(f"trajectory_{name}.csv")
        cols = (table.t, table.xc, table.xc_dot, table.xc_ddot, table.u, table.x0)
        write_csv(path, TRAJECTORY_COLUMNS, zip(*cols))
        results.append({"protocol": name, "file": path.name, "rows": len(table), "cost_J": cost_functional(table)})
        print(f"wrote {path}")
    run.summary("design", _feasibility(run), results, warnings)
    return status


def _energy_row(cfg, trap, name: str, tf: float, delta: float):
    spec = cfg.protocol_spec(name, tf, delta)
    proto = build_protocol(spec)
    epp = anharmonic_avg_quadrature(proto, trap)
    return (tf, name, delta, harmonic_avg_quadrature(proto, trap), epp, closed_form_avg(proto, trap), epp / (trap.eta * delta**4))


def cmd_energy(run: Run) -> int:
    cfg = run.cfg
    trap = cfg.trap_spec()
    rows, warnings = [], []
    for delta in cfg.sweep.deltas or (cfg.delta(trap),):
        for name in cfg.sweep.protocols:
            for tf in cfgmod.sweep_durations(cfg, trap, delta):
                try:
                    rows.append(_energy_row(cfg, trap, name, tf, delta))
                except (InfeasibleBoundError, BoundInactiveError) as exc:
                    warnings.append(f"{name} at tf={fmt(tf)} s, delta={fmt(delta)} m skipped: {exc}")
                    nan = float("nan")
                    rows.append((tf, name, delta, nan, nan, nan, nan))
    rows.sort(key=lambda r: (r[1], r[0], r[2]))
    path = run.path("energy.csv")
    write_csv(path, ENERGY_COLUMNS, rows)
    print(f"wrote {path} ({len(rows)} rows, {len(warnings)} skipped)")
    results = [dict(zip(ENERGY_COLUMNS, r)) for r in rows]
    run.summary("energy", _feasibility(run), results, warnings)
    return EXIT_OK


@dataclass(frozen=True)
class FidelityJob:
    cfg: cfgmod.ScenarioConfig
    protocol: str
    kind: str
    tf: float
    delta: float


def fidelity_row(job: FidelityJob) -> tuple:
    """One sweep row; failures become a status instead of an exception."""
    cfg = job.cfg
    nan = float("nan")
    head = (job.tf, job.protocol, job.kind)
    try:
        trap = cfg.trap_spec()
        spec = cfg.protocol_spec(job.protocol, job.tf, job.delta)
        build_protocol(spec)
        pc = PropagationConfig(job.kind, spec, compensate=cfg.simulation.compensate)
        s = cfg.simulation
        res = run_transport(pc, trap, grid=cfg.grid(trap), initial=s.initial, tol=s.tol, max_halvings=s.max_halvings)
    except InfeasibleBoundError:
        return head + (nan, nan, False, "infeasible")
    except BoundInactiveError:
        return head + (nan, nan, False, "bound-inactive")
    except WindowOverflowError:
        return head + (nan, nan, False, "window-overflow")
    except ConfigurationError:
        return head + (nan, nan, False, "invalid")
    except (NumericalError, FloatingPointError):
        return head + (nan, nan, False, "numerical-error")
    return head + (res.fidelity, res.excitation, res.converged, "ok" if res.converged else "not-converged")


def _map_ordered(fn, jobs: List, threads: int) -> List:
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def _fidelity_outputs(run: Run, command: str, rows: List[tuple]) -> int:
    path = run.path("fidelity.csv")
    write_csv(path, FIDELITY_COLUMNS, rows)
    print(f"wrote {path}")
    warnings = [f"{r[1]}/{r[2]} at tf={fmt(r[0])} s: {r[6]}" for r in rows if r[6] != "ok"]
    results = [dict(zip(FIDELITY_COLUMNS, r)) for r in rows]
    run.summary(command, _feasibility(run), results, warnings)
    return EXIT_OK


def cmd_simulate(run: Run) -> int:
    cfg = run.cfg
    trap = cfg.trap_spec()
    job = FidelityJob(cfg, cfg.protocol.variant, cfg.simulation.kind, cfg.protocol.tf, cfg.delta(trap))
    row = fidelity_row(job)
    status = row[6]
    if status in ("infeasible", "bound-inactive"):
        _fidelity_outputs(run, "simulate", [row])
        print(f"protocol {job.protocol} is {status} at tf={job.tf} s", file=sys.stderr)
        return EXIT_INFEASIBLE
    if status == "invalid":
        raise ConfigurationError("simulation settings are invalid for this trap (window too wide or too coarse)")
    if status in ("window-overflow", "numerical-error"):
        _fidelity_outputs(run, "simulate", [row])
        print(f"simulation failed: {status}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"fidelity = {fmt(row[3])}, excitation = {fmt(row[4])} J, converged = {fmt(row[5])}")
    if cfg.simulation.snapshots:
        _write_snapshots(run, cfg.protocol_spec(job.protocol, job.tf, job.delta), trap)
    return _fidelity_outputs(run, "simulate", [row])


def _write_snapshots(run: Run, spec, trap):
    cfg = run.cfg
    grid = cfg.grid(trap)
    pc = PropagationConfig(cfg.simulation.kind, spec, compensate=cfg.simulation.compensate)
    if cfg.simulation.initial == "anharmonic":
        start = imaginary_time_ground_state(pc.kind, grid, trap)
    else:
        start = ho_eigenstate(0, grid, trap)
    n_steps = max(1, math.ceil(spec.duration / grid.dt - 1e-9))
    every = max(1, math.ceil(n_steps / cfg.simulation.snapshots))
    frames = []
    final = propagate(start, pc, spec, trap, observer=frames.append, observe_every=every)
    if len(frames) < cfg.simulation.snapshots:
        frames.append(final)
    q = grid.q + grid.center

    def rows():
        for wf in frames:
            for qi, a in zip(q, wf.amplitudes):
                yield wf.t, qi, a.real, a.imag

    path = run.path("snapshots.csv")
    write_csv(path, SNAPSHOT_COLUMNS, rows())
    print(f"wrote {path} ({len(frames)} snapshots)")


def cmd_sweep(run: Run) -> int:
    cfg = run.cfg
    trap = cfg.trap_spec()
    delta = cfg.sweep.deltas[0] if cfg.sweep.deltas else cfg.delta(trap)
    jobs = [
        FidelityJob(cfg, name, kind, tf, delta)
        for name in cfg.sweep.protocols
        for kind in cfg.sweep.kinds
        for tf in cfgmod.sweep_durations(cfg, trap, delta)
    ]
    rows = _map_ordered(fidelity_row, jobs, run.threads)
    return _fidelity_outputs(run, "sweep", rows)


COMMANDS = {
    "check": cmd_check,
    "design": cmd_design,
    "energy": cmd_energy,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anharmonic-shuttle", description="Optimal atom transport in an anharmonic tweezer.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("config", help="TOML scenario file")
    p.add_argument("--out-dir", default=".", help="directory for CSV and JSON output")
    p.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("--seed", type=int, default=0, help="seed of the randomized optimality check")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = cfgmod.load(args.config)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](Run(cfg, out_dir, args.threads, args.seed))
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleBoundError, BoundInactiveError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (QuadratureError, NumericalError, WindowOverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
