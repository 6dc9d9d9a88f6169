"""Scenario files and the ``internal-bo`` command line.

Subcommands::

    internal-bo coeffs   --scenario S.json
    internal-bo simulate --scenario S.json [--out-dir DIR]
    internal-bo verify   --scenario S.json [--out-dir DIR] [--seed N]

Exit codes: 0 success, 1 verification failure, 2 invalid scenario,
3 the integration blew up.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import evolution as ev
from . import spectral as sp
from . import verification as vf
from .model_params import (
    DerivedCoeffs,
    FluidStack,
    InvalidStackError,
    PolarityError,
    derive,
    parse_branch,
    validate,
)
from .spectral import PeriodicGrid

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_INVALID, EXIT_BLOWUP = 0, 1, 2, 3

STACK_KEYS = {"rho", "rho1", "h1", "gamma", "gamma1", "kappa", "g"}
STACK_REQUIRED = {"rho", "rho1", "h1"}
SOLVER_KEYS = {"dt", "steps", "scheme", "dealias", "diagnostics_every"}
TOP_KEYS = {"stack", "branch", "delta", "grid", "mode", "initial", "solver", "outputs"}
MODES = ("bo", "coupled")


class ScenarioError(ValueError):
    """The scenario file is malformed or violates a model constraint."""


@dataclass(frozen=True)
class SolitonInit:
    eta0: float
    x0: float

    def to_dict(self):
        return {"soliton": {"eta0": self.eta0, "x0": self.x0}}


@dataclass(frozen=True)
class ModeInit:
    amplitude: float
    wavenumber: float

    def to_dict(self):
        return {"mode": {"amplitude": self.amplitude, "wavenumber": self.wavenumber}}


@dataclass(frozen=True)
class FileInit:
    path: str

    def to_dict(self):
        return {"file": {"path": self.path}}


@dataclass(frozen=True)
class Snapshot:
    path: str
    time: float


@dataclass(frozen=True)
class Outputs:
    diagnostics: str = "diagnostics.ndjson"
    snapshots: tuple[Snapshot, ...] = ()

    def to_dict(self):
        return {
            "diagnostics": self.diagnostics,
            "snapshots": [{"path": s.path, "time": s.time} for s in self.snapshots],
        }


@dataclass(frozen=True)
class Scenario:
    stack: FluidStack
    branch: int
    delta: float
    grid: PeriodicGrid
    mode: str
    initial: SolitonInit | ModeInit | FileInit
    solver: ev.SolverConfig
    outputs: Outputs = Outputs()
    base_dir: Path = field(default=Path("."), compare=False)

    def to_dict(self) -> dict:
        return {
            "stack": self.stack.to_dict(),
            "branch": "+" if self.branch > 0 else "-",
            "delta": self.delta,
            "grid": self.grid.to_dict(),
            "mode": self.mode,
            "initial": self.initial.to_dict(),
            "solver": self.solver.to_dict(),
            "outputs": self.outputs.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @property
    def coeffs(self) -> DerivedCoeffs:
        return derive(self.stack, self.branch)


# ---------------------------------------------------------------------------
# parsing


def _keys(obj, allowed, required, where):
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where} must be an object")
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ScenarioError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    missing = set(required) - set(obj)
    if missing:
        raise ScenarioError(f"missing key(s) in {where}: {', '.join(sorted(missing))}")


def _number(value, where) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ScenarioError(f"{where} must be a finite number, got {value!r}")
    return float(value)


def _integer(value, where) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{where} must be an integer, got {value!r}")
    return value


def _parse_initial(obj, base_dir: Path):
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ScenarioError("initial must have exactly one of 'soliton', 'mode', 'file'")
    (kind, body), = obj.items()
    if kind == "soliton":
        _keys(body, {"eta0", "x0"}, {"eta0", "x0"}, "initial.soliton")
        return SolitonInit(_number(body["eta0"], "initial.soliton.eta0"), _number(body["x0"], "initial.soliton.x0"))
    if kind == "mode":
        _keys(body, {"amplitude", "wavenumber"}, {"amplitude", "wavenumber"}, "initial.mode")
        return ModeInit(_number(body["amplitude"], "initial.mode.amplitude"), _number(body["wavenumber"], "initial.mode.wavenumber"))
    if kind == "file":
        _keys(body, {"path"}, {"path"}, "initial.file")
        path = body["path"]
        if not isinstance(path, str):
            raise ScenarioError("initial.file.path must be a string")
        if not (base_dir / path).is_file():
            raise ScenarioError(f"initial.file.path does not exist: {base_dir / path}")
        return FileInit(path)
    raise ScenarioError(f"unknown initial kind {kind!r}; expected soliton, mode or file")


def _parse_outputs(obj) -> Outputs:
    _keys(obj, {"diagnostics", "snapshots"}, set(), "outputs")
    diag = obj.get("diagnostics", Outputs.diagnostics)
    if not isinstance(diag, str):
        raise ScenarioError("outputs.diagnostics must be a path string")
    snaps = []
    for i, s in enumerate(obj.get("snapshots", [])):
        _keys(s, {"path", "time"}, {"path", "time"}, f"outputs.snapshots[{i}]")
        if not isinstance(s["path"], str):
            raise ScenarioError(f"outputs.snapshots[{i}].path must be a string")
        snaps.append(Snapshot(s["path"], _number(s["time"], f"outputs.snapshots[{i}].time")))
    return Outputs(diag, tuple(snaps))


def parse_scenario(data: dict, base_dir: Path | str = ".") -> Scenario:
    base_dir = Path(base_dir)
    _keys(data, TOP_KEYS, TOP_KEYS - {"outputs"}, "scenario")

    _keys(data["stack"], STACK_KEYS, STACK_REQUIRED, "stack")
    stack = FluidStack(**{k: _number(v, f"stack.{k}") for k, v in data["stack"].items()})
    try:
        validate(stack)
        branch = parse_branch(data["branch"])
    except (InvalidStackError, ValueError) as exc:
        raise ScenarioError(str(exc)) from exc

    delta = _number(data["delta"], "delta")
    if not 0.0 < delta < 1.0:
        raise ScenarioError(f"delta must lie in (0, 1), got {delta}")

    _keys(data["grid"], {"n", "length"}, {"n", "length"}, "grid")
    try:
        grid = PeriodicGrid(_integer(data["grid"]["n"], "grid.n"), _number(data["grid"]["length"], "grid.length"))
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc

    mode = data["mode"]
    if mode not in MODES:
        raise ScenarioError(f"mode must be one of {MODES}, got {mode!r}")

    initial = _parse_initial(data["initial"], base_dir)

    _keys(data["solver"], SOLVER_KEYS, {"dt", "steps"}, "solver")
    s = data["solver"]
    try:
        solver = ev.SolverConfig(
            dt=_number(s["dt"], "solver.dt"),
            steps=_integer(s["steps"], "solver.steps"),
            scheme=s.get("scheme", "rk4_integrating_factor"),
            dealias=bool(s.get("dealias", True)),
            diagnostics_every=_integer(s.get("diagnostics_every", 1), "solver.diagnostics_every"),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc

    outputs = _parse_outputs(data.get("outputs", {}))
    scenario = Scenario(stack, branch, delta, grid, mode, initial, solver, outputs, base_dir)
    if isinstance(initial, SolitonInit):
        try:
            scenario.coeffs.soliton(initial.eta0, delta)
        except PolarityError as exc:
            raise ScenarioError(str(exc)) from exc
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ScenarioError(f"scenario file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    return parse_scenario(data, path.parent)


# ---------------------------------------------------------------------------
# initial data


def initial_state(scenario: Scenario) -> ev.SimState:
    grid, delta, init = scenario.grid, scenario.delta, scenario.initial
    coeffs = scenario.coeffs
    if isinstance(init, SolitonInit):
        eta = ev.soliton_exact(grid, 0.0, init.eta0, init.x0, coeffs, delta)
    elif isinstance(init, ModeInit):
        j = init.wavenumber * grid.length / (2 * np.pi)
        if abs(j - round(j)) > 1e-9 * max(1.0, abs(j)) or not 0 < round(j) < grid.n // 2:
            raise ScenarioError(f"wavenumber {init.wavenumber} is not a resolved grid wavenumber 2*pi*j/L")
        eta = init.amplitude * np.cos(init.wavenumber * grid.x)
    else:
        try:
            _, eta = sp.read_field_csv(scenario.base_dir / init.path, grid)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc
        if not sp.is_zero_mean(eta):
            raise ScenarioError(
                f"initial field {init.path} must have zero mean, got mean {np.mean(eta):.3e}"
            )
    u = None
    if scenario.mode == "coupled":
        u = ev.closure_momentum(eta, grid, scenario.stack, coeffs, delta)
    return ev.SimState(0.0, eta, delta, u)


def make_system(scenario: Scenario):
    if scenario.mode == "bo":
        return ev.BOSystem(scenario.grid, scenario.coeffs, scenario.delta, scenario.solver.dealias)
    return ev.CoupledSystem(scenario.grid, scenario.stack, scenario.delta, scenario.solver.dealias)


# ---------------------------------------------------------------------------
# commands


def cmd_coeffs(scenario: Scenario, out=None) -> int:
    out = out or sys.stdout
    coeffs = scenario.coeffs
    print(f"branch {'+' if coeffs.branch > 0 else '-'}", file=out)
    for name, value in coeffs.table():
        print(f"{name:<12} {value:.12g}", file=out)
    for name, value in coeffs.residuals.items():
        status = "PASS" if value <= 1e-12 else "FAIL"
        print(f"{status} residual.{name} measured={value:.3e} threshold<=1e-12", file=out)
    s = scenario.stack
    if s.kappa == 0 and s.gamma == 0 and s.gamma1 == 0:
        ref_nl = -1.5 * coeffs.c / s.h1
        ref_d = s.rho * s.h1 * coeffs.c / (2 * s.rho1)
        ok = math.isclose(coeffs.lam_nl, ref_nl, rel_tol=1e-14) and math.isclose(coeffs.lam_disp, ref_d, rel_tol=1e-14)
        print(f"{'PASS' if ok else 'FAIL'} no_current lam_nl=-3c/(2h1)={ref_nl:.12g} lam_disp=rho h1 c/(2 rho1)={ref_d:.12g}", file=out)
    return EXIT_OK


def _snapshot_steps(scenario: Scenario) -> dict[int, list[str]]:
    dt, steps = scenario.solver.dt, scenario.solver.steps
    out: dict[int, list[str]] = {}
    for snap in scenario.outputs.snapshots:
        i = int(round(snap.time / dt))
        if not 0 <= i <= steps or abs(i * dt - snap.time) > 1e-9 * max(1.0, abs(snap.time)):
            raise ScenarioError(f"snapshot time {snap.time} is not a multiple of dt within the run")
        out.setdefault(i, []).append(snap.path)
    return out


def simulate(scenario: Scenario, out_dir: Path) -> tuple[ev.SimState, list[ev.DiagnosticsRecord]]:
    """Run the scenario, writing NDJSON diagnostics and CSV snapshots under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    state = initial_state(scenario)
    snaps = _snapshot_steps(scenario)
    system = make_system(scenario)
    grid, stack, coeffs = scenario.grid, scenario.stack, scenario.coeffs
    records: list[ev.DiagnosticsRecord] = []
    diag_path = out_dir / scenario.outputs.diagnostics
    diag_path.parent.mkdir(parents=True, exist_ok=True)
    every = scenario.solver.diagnostics_every

    with diag_path.open("w") as fh:

        def observe(i, s):
            if i % every == 0 or i == scenario.solver.steps:
                rec = ev.run_diagnostics(s, grid, stack, coeffs)
                records.append(rec)
                fh.write(rec.to_json() + "\n")
            for p in snaps.get(i, []):
                sp.write_field_csv(out_dir / p, grid, s.eta)

        final = ev.integrate(state, scenario.solver, system, observe, observe_steps=set(snaps))
    return final, records


def _summary(scenario: Scenario, records) -> str:
    r0, r1 = records[0], records[-1]
    dh = abs(r1.hamiltonian - r0.hamiltonian) / abs(r0.hamiltonian) if r0.hamiltonian else 0.0
    parts = [
        f"t_final={r1.t:.12g}",
        f"records={len(records)}",
        f"mass_drift={abs(r1.mass - r0.mass):.3e}",
        f"hamiltonian_drift={dh:.3e}",
    ]
    if isinstance(scenario.initial, SolitonInit):
        sol = scenario.coeffs.soliton(scenario.initial.eta0, scenario.delta)
        if len(records) >= 2:
            V = vf._peak_speed([r.t for r in records], [r.peak_x for r in records], scenario.grid.length)
            parts.append(f"measured_speed={V:.12g}")
        parts.append(f"predicted_speed={sol.speed:.12g}")
    return "summary " + " ".join(parts)


def cmd_simulate(scenario: Scenario, out_dir: Path, out=None) -> int:
    out = out or sys.stdout
    try:
        _, records = simulate(scenario, out_dir)
    except ev.BlowUpError as exc:
        print(f"error: blow-up: {exc}; last valid t={exc.t_last_valid:.12g}", file=sys.stderr)
        return EXIT_BLOWUP
    except ev.CFLError as exc:
        raise ScenarioError(str(exc)) from exc
    print(_summary(scenario, records), file=out)
    return EXIT_OK


def _soliton_setup(scenario: Scenario) -> vf.SolitonSetup:
    coeffs = scenario.coeffs
    grid = scenario.grid
    if isinstance(scenario.initial, SolitonInit):
        eta0, x0 = scenario.initial.eta0, scenario.initial.x0
    else:
        # soliton whose half-width is L/256, with the admissible polarity
        eta0 = 4.0 * coeffs.lam_disp / (coeffs.lam_nl * grid.length / 256.0)
        x0 = 0.25 * grid.length
    return vf.SolitonSetup(
        scenario.stack, coeffs, scenario.delta, grid, eta0, x0, scenario.solver.dt, scenario.solver.scheme
    )


def run_checks(scenario: Scenario, seed: int = 0) -> tuple[list[vf.CheckResult], dict]:
    setup = _soliton_setup(scenario)
    results: list[vf.CheckResult] = []
    results += vf.check_dispersion(seed)
    results += vf.check_closure(seed)
    results += vf.check_no_current(scenario.stack)
    results += vf.check_soliton_residual(setup)
    try:
        run = vf.run_soliton_propagation(setup)
        results += vf.check_propagation(setup, run)
        results += vf.check_conservation(setup, run)
    except (ev.BlowUpError, ev.CFLError) as exc:
        results.append(vf.CheckResult("propagation.run", False, math.inf, 0.0, details={"error": str(exc)}))
    results += vf.check_cross_model(scenario.stack, scenario.branch)
    results.append(vf.check_cross_model_at(scenario.stack, scenario.branch, scenario.delta))
    results += vf.check_dno_truncation(scenario.stack.h1, seed)
    results.append(vf.check_hamiltonian_assembly(scenario.stack, seed))
    audit_results, finding = vf.check_sign_audit()
    results += audit_results
    results += vf.check_line_integral()
    return results, finding


def cmd_verify(scenario: Scenario, out_dir: Path, seed: int = 0, out=None) -> int:
    out = out or sys.stdout
    results, finding = run_checks(scenario, seed)
    for r in results:
        print(r.line(), file=out)
    for form, f in finding.items():
        pairs = ", ".join(f"(sigma={p['sigma']:+d}, C0{p['C0_sign']})" for p in f["self_consistent"]) or "none"
        print(f"sign_audit {form}: self-consistent pairings: {pairs}", file=out)
    failed = [r for r in results if not r.informational and not r.passed]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {
        "seed": seed,
        "passed": not failed,
        "checks": [r.as_dict() for r in results],
        "sign_audit": finding,
    }
    (out_dir / "verify_report.json").write_text(json.dumps(report, indent=2, default=float) + "\n")
    print(f"{'PASS' if not failed else 'FAIL'} verify {len(results) - len(failed)}/{len(results)}", file=out)
    return EXIT_OK if not failed else EXIT_VERIFY_FAILED


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="internal-bo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("coeffs", "print derived coefficients and self-check residuals"),
        ("simulate", "integrate the scenario and write diagnostics/snapshots"),
        ("verify", "run the oracle checks at the scenario parameters"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--scenario", required=True, type=Path)
        p.add_argument("--out-dir", type=Path, default=Path("."))
        p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
        if args.command == "coeffs":
            return cmd_coeffs(scenario)
        if args.command == "simulate":
            return cmd_simulate(scenario, args.out_dir)
        return cmd_verify(scenario, args.out_dir, args.seed)
    except ScenarioError as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
