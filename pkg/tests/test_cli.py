import csv
import json
import math
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anharmonic_shuttle import config as cfgmod
from anharmonic_shuttle.cli import (
    ENERGY_COLUMNS,
    FIDELITY_COLUMNS,
    SNAPSHOT_COLUMNS,
    TRAJECTORY_COLUMNS,
    fmt,
    main,
)
from anharmonic_shuttle.trap_model import ConfigurationError, reference_trap

SIGMA = reference_trap().oscillator_length()

# a tiny shuttle that simulates in well under a second
FAST_SIM = f"""
trap.distance = {20 * SIGMA!r}
protocol.variant = "unbounded"
simulation.kind = "harmonic"
simulation.n_points = 256
simulation.half_width = {16 * SIGMA!r}
"""


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_defaults_mirror_reference_scenario():
    cfg = cfgmod.loads("")
    trap = cfg.trap_spec()
    assert trap.omega0 == pytest.approx(2 * math.pi * 20)
    assert trap.distance == 1e-2
    assert cfg.protocol.tf == 0.052
    assert cfg.delta(trap) == pytest.approx(0.89 * 14e-2 / (3 * trap.omega0**2 * 0.052**2))


def test_dotted_keys_and_tables_are_equivalent():
    a = cfgmod.loads('protocol.tf = 0.06\nsweep.protocols = ["cubic"]\n')
    b = cfgmod.loads('[protocol]\ntf = 0.06\n[sweep]\nprotocols = ["cubic"]\n')
    assert a == b


@pytest.mark.parametrize(
    "text,match",
    [
        ("protocol.tff = 1.0", "unknown key protocol.tff"),
        ("solver.x = 1", "unknown section"),
        ('protocol.variant = "fast"', "protocol.variant"),
        ('simulation.n_points = "many"', "integer"),
        ("protocol.tf = -1.0", "positive"),
        ("protocol.tf = [", "malformed"),
        ("simulation.snapshots = 100", "snapshots"),
    ],
)
def test_invalid_configs_rejected(text, match):
    with pytest.raises(ConfigurationError, match=match):
        cfgmod.loads(text)


@settings(max_examples=40, deadline=None)
@given(
    tf=st.floats(0.03, 0.5),
    ratio=st.floats(0.86, 1.0),
    count=st.integers(1, 50),
    kinds=st.lists(st.sampled_from(["harmonic", "quartic", "gaussian"]), min_size=1, max_size=3),
    compensate=st.booleans(),
    depth=st.one_of(st.none(), st.floats(1e-28, 1e-25)),
)
def test_config_round_trip(tf, ratio, count, kinds, compensate, depth):
    text = f"protocol.tf = {tf!r}\nprotocol.delta_ratio = {ratio!r}\nsweep.tf_count = {count}\n"
    text += f"sweep.kinds = {json.dumps(kinds)}\nsimulation.compensate = {str(compensate).lower()}\n"
    if depth is not None:
        text += f"trap.depth = {depth!r}\n"
    cfg = cfgmod.loads(text)
    again = cfgmod.loads(cfgmod.dumps(cfg))
    assert again == cfg
    assert cfgmod.dumps(again) == cfgmod.dumps(cfg)


def test_number_formatting():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(float("nan")) == "nan"
    assert fmt(True) == "true"
    assert fmt(np.int64(3)) == "3"
    assert float(fmt(math.pi)) == math.pi


def test_check_reports_feasibility(tmp_path, capsys):
    assert main(["check", str(write(tmp_path, "")), "--out-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "feasible" in out and "0.0510311" in out
    doc = json.loads((tmp_path / "check_summary.json").read_text())
    assert set(doc) == {"config_echo", "feasibility", "results", "warnings"}
    assert doc["feasibility"]["verdict"] == "feasible"
    assert doc["results"][0]["passed"] is True


def test_check_exit_codes(tmp_path):
    delta = 0.89 * 14e-2 / (3 * (2 * math.pi * 20) ** 2 * 0.052**2)
    infeasible = write(tmp_path, f"protocol.tf = 0.045\nprotocol.delta = {delta!r}\n", "a.toml")
    assert main(["check", str(infeasible), "--out-dir", str(tmp_path)]) == 2
    inactive = write(tmp_path, "protocol.delta_ratio = 1.2\n", "b.toml")
    assert main(["check", str(inactive), "--out-dir", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "check_summary.json").read_text())
    assert doc["feasibility"]["verdict"] == "bound inactive" and doc["warnings"]
    assert main(["check", str(write(tmp_path, "protocol.tff = 1\n", "c.toml"))]) == 1
    assert main(["check", str(tmp_path / "missing.toml")]) == 1
    assert main(["bogus", str(infeasible)]) == 1


def test_design_outputs(tmp_path):
    cfg = write(tmp_path, "output.samples = 257\n")
    assert main(["design", str(cfg), "--out-dir", str(tmp_path)]) == 0
    for name in ("bounded", "unbounded", "polynomial5", "cubic"):
        rows = read_csv(tmp_path / f"trajectory_{name}.csv")
        assert tuple(rows[0]) == TRAJECTORY_COLUMNS
        assert len(rows) == 258
    u = np.array([float(r[4]) for r in read_csv(tmp_path / "trajectory_bounded.csv")[1:]])
    delta = json.loads((tmp_path / "design_summary.json").read_text())["feasibility"]["delta"]
    assert u.min() == pytest.approx(-delta, rel=1e-15) and u.max() == pytest.approx(delta, rel=1e-15)


def test_design_is_byte_deterministic(tmp_path):
    cfg = write(tmp_path, "output.samples = 129\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["design", str(cfg), "--out-dir", str(a)]) == 0
    assert main(["design", str(cfg), "--out-dir", str(b)]) == 0
    for f in sorted(a.iterdir()):
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_energy_sweep(tmp_path):
    cfg = write(tmp_path, "sweep.tf_count = 6\n")
    assert main(["energy", str(cfg), "--out-dir", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "energy.csv")
    assert tuple(rows[0]) == ENERGY_COLUMNS
    body = rows[1:]
    keys = [(r[1], float(r[0])) for r in body]
    assert keys == sorted(keys)
    by = {}
    for r in body:
        by.setdefault(r[1], {})[float(r[0])] = float(r[4])
    # bounded at tf_min has no solution and becomes a warning row
    tf_min = min(by["bounded"])
    assert math.isnan(by["bounded"][tf_min])
    doc = json.loads((tmp_path / "energy_summary.json").read_text())
    assert len(doc["warnings"]) == 1
    for tf, e in by["bounded"].items():
        if not math.isnan(e):
            # at tf_star the bound equals delta0 and both coincide up to rounding
            assert e >= by["unbounded"][tf] * (1 - 1e-13)
    ratios = {by["cubic"][tf] / by["unbounded"][tf] for tf in by["cubic"]}
    assert max(ratios) == pytest.approx(min(ratios), rel=1e-9)


def test_simulate_with_snapshots(tmp_path):
    cfg = write(tmp_path, FAST_SIM + "simulation.snapshots = 8\n")
    assert main(["simulate", str(cfg), "--out-dir", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "fidelity.csv")
    assert tuple(rows[0]) == FIDELITY_COLUMNS
    assert rows[1][1:3] == ["unbounded", "harmonic"] and rows[1][6] == "ok"
    assert float(rows[1][3]) > 1 - 1e-10
    snaps = read_csv(tmp_path / "snapshots.csv")
    assert tuple(snaps[0]) == SNAPSHOT_COLUMNS
    times = sorted({float(r[0]) for r in snaps[1:]})
    assert 1 <= len(times) <= 8
    assert len(snaps) - 1 == 256 * len(times)


def test_simulate_infeasible_and_window_errors(tmp_path):
    cfg = write(tmp_path, FAST_SIM.replace('"unbounded"', '"bounded"') + "protocol.delta = 1e-9\n", "a.toml")
    assert main(["simulate", str(cfg), "--out-dir", str(tmp_path)]) == 2
    coarse = write(tmp_path, FAST_SIM.replace(f"{16 * SIGMA!r}", f"{64 * SIGMA!r}"), "b.toml")
    assert main(["simulate", str(coarse), "--out-dir", str(tmp_path)]) == 1


def test_sweep_marks_failures_and_keeps_order(tmp_path):
    text = FAST_SIM + 'sweep.protocols = ["bounded", "cubic"]\nsweep.kinds = ["harmonic"]\n'
    text += "sweep.tf_start = 0.045\nsweep.tf_stop = 0.06\nsweep.tf_count = 3\n"
    text += f"protocol.delta = {0.89 * 14 * 20 * SIGMA / (3 * (2 * math.pi * 20) ** 2 * 0.052**2)!r}\n"
    cfg = write(tmp_path, text)
    one, two = tmp_path / "one", tmp_path / "two"
    assert main(["sweep", str(cfg), "--out-dir", str(one)]) == 0
    assert main(["sweep", str(cfg), "--out-dir", str(two), "--threads", "2"]) == 0
    assert (one / "fidelity.csv").read_bytes() == (two / "fidelity.csv").read_bytes()
    rows = read_csv(one / "fidelity.csv")[1:]
    assert [(r[1], float(r[0])) for r in rows] == [
        ("bounded", 0.045),
        ("bounded", 0.0525),
        ("bounded", 0.06),
        ("cubic", 0.045),
        ("cubic", 0.0525),
        ("cubic", 0.06),
    ]
    status = {(r[1], float(r[0])): r[6] for r in rows}
    assert status[("bounded", 0.045)] == "infeasible"
    assert status[("bounded", 0.06)] == "bound-inactive"
    assert status[("cubic", 0.045)] == "ok"


def test_threads_must_be_positive(tmp_path):
    assert main(["check", str(write(tmp_path, "")), "--threads", "0"]) == 1


def test_module_entry_point(tmp_path):
    import subprocess

    cfg = write(tmp_path, "protocol.tf = 0.06\n")
    done = subprocess.run(
        [sys.executable, "-m", "anharmonic_shuttle", "check", str(cfg), "--out-dir", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert done.returncode == 0, done.stderr
    assert (tmp_path / "check_summary.json").exists()
