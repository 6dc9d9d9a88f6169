import copy
import json
import re
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from internal_bo import evolution as ev
from internal_bo import runner
from internal_bo import spectral as sp
from internal_bo.spectral import PeriodicGrid

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def base():
    return json.loads((SCENARIOS / "default.json").read_text())


def write(tmp_path, data, name="s.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def small(data=None):
    data = copy.deepcopy(data or base())
    data["grid"] = {"n": 1024, "length": 256.0}
    data["solver"].update(dt=0.05, steps=40, diagnostics_every=10)
    data["outputs"] = {"diagnostics": "diag.ndjson", "snapshots": [{"path": "snap/eta0.csv", "time": 0.0}]}
    return data


def test_coeffs_prints_table_and_passes(tmp_path, capsys):
    assert runner.main(["coeffs", "--scenario", str(SCENARIOS / "default.json")]) == 0
    out = capsys.readouterr().out
    for name in ("Gamma", "A", "c_plus", "c_minus", "alpha", "beta", "lam_disp", "lam_nl", "mu", "C0_per_eta0"):
        assert re.search(rf"^{name}\s+\S+$", out, re.M)
    # 12 significant digits
    assert "0.48265881191" in out
    residual_lines = [ln for ln in out.splitlines() if "residual." in ln]
    assert residual_lines and all(ln.startswith("PASS") for ln in residual_lines)


def test_coeffs_no_current(capsys):
    assert runner.main(["coeffs", "--scenario", str(SCENARIOS / "no_current.json")]) == 0
    out = capsys.readouterr().out
    line = next(ln for ln in out.splitlines() if "no_current" in ln)
    assert line.startswith("PASS") and "lam_nl=-3c/(2h1)" in line


def test_unstable_stack_rejected(tmp_path, capsys):
    data = base()
    data["stack"].update(rho=1.0, rho1=1.2)
    assert runner.main(["coeffs", "--scenario", str(write(tmp_path, data))]) == runner.EXIT_INVALID
    assert "unstable stratification" in capsys.readouterr().err


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d["stack"].update(rh0=1.0), "unknown key"),
        (lambda d: d.update(extra=1), "unknown key"),
        (lambda d: d["solver"].update(sheme="rk4_plain"), "unknown key"),
        (lambda d: d.update(branch="up"), "branch"),
        (lambda d: d.update(delta=1.5), "delta"),
        (lambda d: d.update(mode="full"), "mode"),
        (lambda d: d["grid"].update(n=1000), "power of two"),
        (lambda d: d.update(initial={"soliton": {"eta0": 2.5, "x0": 64.0}}), "polarity"),
        (lambda d: d.update(initial={"file": {"path": "missing.csv"}}), "does not exist"),
        (lambda d: d.update(initial={"soliton": {"eta0": -1.0, "x0": 1.0}, "mode": {}}), "exactly one"),
        (lambda d: d["solver"].update(dt="0.1"), "finite number"),
        (lambda d: d.pop("stack"), "missing"),
    ],
)
def test_invalid_scenarios(tmp_path, capsys, mutate, message):
    data = base()
    mutate(data)
    assert runner.main(["coeffs", "--scenario", str(write(tmp_path, data))]) == runner.EXIT_INVALID
    assert message in capsys.readouterr().err


def test_missing_and_malformed_file(tmp_path):
    assert runner.main(["coeffs", "--scenario", str(tmp_path / "nope.json")]) == runner.EXIT_INVALID
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert runner.main(["coeffs", "--scenario", str(bad)]) == runner.EXIT_INVALID


def test_simulate_zero_steps(tmp_path):
    data = small()
    data["solver"]["steps"] = 0
    assert runner.main(["simulate", "--scenario", str(write(tmp_path, data)), "--out-dir", str(tmp_path / "o")]) == 0
    lines = (tmp_path / "o" / "diag.ndjson").read_text().splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0])["t"] == 0.0


def test_simulate_outputs_and_speed(tmp_path, capsys):
    data = small()
    path = write(tmp_path, data)
    assert runner.main(["simulate", "--scenario", str(path), "--out-dir", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    measured = float(re.search(r"measured_speed=(\S+)", out).group(1))
    predicted = float(re.search(r"predicted_speed=(\S+)", out).group(1))
    assert measured == pytest.approx(predicted, rel=5e-3)
    records = [json.loads(ln) for ln in (tmp_path / "o" / "diag.ndjson").read_text().splitlines()]
    assert [r["t"] for r in records] == pytest.approx([0.0, 0.5, 1.0, 1.5, 2.0])
    assert set(records[0]) == {"t", "mass", "hamiltonian", "l2", "peak_x", "peak_h"}
    grid, eta = sp.read_field_csv(tmp_path / "o" / "snap" / "eta0.csv")
    scenario = runner.load_scenario(path)
    # the integrator evolves the dealiased projection of the initial field
    assert np.allclose(eta, sp.dealias(runner.initial_state(scenario).eta, grid), rtol=0, atol=1e-15)


def test_simulate_deterministic(tmp_path):
    path = write(tmp_path, small())
    for d in ("a", "b"):
        assert runner.main(["simulate", "--scenario", str(path), "--out-dir", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "diag.ndjson").read_bytes() == (tmp_path / "b" / "diag.ndjson").read_bytes()
    assert (tmp_path / "a" / "snap" / "eta0.csv").read_bytes() == (tmp_path / "b" / "snap" / "eta0.csv").read_bytes()


def test_file_initial_condition(tmp_path):
    grid = PeriodicGrid(1024, 256.0)
    bump = np.exp(-((grid.x - 128.0) ** 2))
    sp.write_field_csv(tmp_path / "nonzero.csv", grid, bump)
    sp.write_field_csv(tmp_path / "zero.csv", grid, bump - bump.mean())
    data = small()
    data["initial"] = {"file": {"path": "nonzero.csv"}}
    out = tmp_path / "o"
    assert runner.main(["simulate", "--scenario", str(write(tmp_path, data)), "--out-dir", str(out)]) == runner.EXIT_INVALID
    assert not (out / "diag.ndjson").exists()
    data["initial"] = {"file": {"path": "zero.csv"}}
    assert runner.main(["simulate", "--scenario", str(write(tmp_path, data)), "--out-dir", str(out)]) == 0


def test_mode_initial_condition(tmp_path):
    data = small()
    data["initial"] = {"mode": {"amplitude": 0.01, "wavenumber": 2 * np.pi * 8 / 256.0}}
    assert runner.main(["simulate", "--scenario", str(write(tmp_path, data)), "--out-dir", str(tmp_path / "o")]) == 0
    data["initial"] = {"mode": {"amplitude": 0.01, "wavenumber": 0.1}}
    assert runner.main(["simulate", "--scenario", str(write(tmp_path, data)), "--out-dir", str(tmp_path / "o")]) == runner.EXIT_INVALID


def test_coupled_simulation(tmp_path, capsys):
    path = SCENARIOS / "coupled.json"
    assert runner.main(["simulate", "--scenario", str(path), "--out-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    measured = float(re.search(r"measured_speed=(\S+)", out).group(1))
    predicted = float(re.search(r"predicted_speed=(\S+)", out).group(1))
    assert measured == pytest.approx(predicted, rel=1e-2)


def test_blowup_exit_code(tmp_path, monkeypatch, capsys):
    def explode(*args, **kwargs):
        raise ev.BlowUpError("amplitude too large", 1.25)

    monkeypatch.setattr(ev, "integrate", explode)
    path = write(tmp_path, small())
    assert runner.main(["simulate", "--scenario", str(path), "--out-dir", str(tmp_path)]) == runner.EXIT_BLOWUP
    assert "last valid t=1.25" in capsys.readouterr().err


def test_snapshot_time_must_be_on_step(tmp_path):
    data = small()
    data["outputs"]["snapshots"] = [{"path": "x.csv", "time": 0.033}]
    assert runner.main(["simulate", "--scenario", str(write(tmp_path, data)), "--out-dir", str(tmp_path)]) == runner.EXIT_INVALID


def test_verify_default_passes(tmp_path, capsys):
    code = runner.main(["verify", "--scenario", str(SCENARIOS / "default.json"), "--out-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0, out
    report = json.loads((tmp_path / "verify_report.json").read_text())
    assert report["passed"]
    eta_form = report["sign_audit"]["eta_form"]["self_consistent"]
    assert {(p["sigma"], p["C0_sign"]) for p in eta_form} == {(1, "-"), (-1, "+")}
    assert report["sign_audit"]["sigma_form"]["self_consistent"] == []


def test_verify_coarse_fails_with_numbers(tmp_path, capsys):
    code = runner.main(["verify", "--scenario", str(SCENARIOS / "coarse.json"), "--out-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == runner.EXIT_VERIFY_FAILED
    fails = [ln for ln in out.splitlines() if ln.startswith("FAIL ") and "verify" not in ln]
    assert any("soliton.residual" in ln for ln in fails)
    assert all("measured=" in ln and "threshold" in ln for ln in fails)


def test_verify_delta_half_reports_constant(tmp_path, capsys):
    runner.main(["verify", "--scenario", str(SCENARIOS / "delta_half.json"), "--out-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert re.search(r"^INFO cross_model.constant measured=\S+", out, re.M)


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run(
        [sys.executable, "-m", "internal_bo", "coeffs", "--scenario", str(SCENARIOS / "default.json")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0 and "lam_nl" in proc.stdout


@settings(max_examples=40, deadline=None)
@given(
    st.floats(1.01, 3.0),
    st.floats(0.1, 5.0),
    st.floats(-0.5, 0.5),
    st.sampled_from(["+", "-"]),
    st.floats(0.01, 0.9),
    st.sampled_from(["bo", "coupled"]),
    st.sampled_from(list(ev.SCHEMES)),
    st.integers(0, 500),
)
def test_scenario_round_trip(rho, h1, kappa, branch, delta, mode, scheme, steps):
    data = base()
    data["stack"].update(rho=rho, h1=h1, kappa=kappa)
    data.update(branch=branch, delta=delta, mode=mode)
    data["initial"] = {"mode": {"amplitude": 0.1, "wavenumber": 0.5}}
    data["solver"].update(scheme=scheme, steps=steps)
    first = runner.parse_scenario(data)
    second = runner.parse_scenario(json.loads(first.to_json()))
    assert first == second
    assert first.to_dict() == second.to_dict()
