"""Oracle-based checks shared by ``internal-bo verify`` and the acceptance tests.

Each check returns a :class:`CheckResult` carrying the measured value and the
threshold it was judged against. Randomised checks take a seed and are
deterministic for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import energetics as en
from . import evolution as ev
from . import spectral as sp
from .model_params import (
    DerivedCoeffs,
    FluidStack,
    alpha_matching_residual,
    beta_matching_residual,
    bo_coefficients,
    closure_coefficients,
    compatibility_residual,
    derive,
    speed_identity_residual,
    wave_speed,
)
from .spectral import PeriodicGrid

__all__ = [
    "CheckResult",
    "SolitonSetup",
    "random_stack",
    "check_dispersion",
    "check_closure",
    "check_no_current",
    "check_soliton_residual",
    "run_soliton_propagation",
    "check_propagation",
    "check_conservation",
    "check_cross_model",
    "check_cross_model_at",
    "check_dno_truncation",
    "check_hamiltonian_assembly",
    "sign_audit",
    "check_sign_audit",
    "check_line_integral",
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    comparison: str = "<="
    informational: bool = False
    details: dict = field(default_factory=dict)
    upper: float | None = None

    @property
    def status(self) -> str:
        return "INFO" if self.informational else ("PASS" if self.passed else "FAIL")

    def threshold_text(self) -> str:
        if self.upper is not None:
            return f"threshold=[{self.threshold:.6g}, {self.upper:.6g}]"
        if self.informational:
            return "threshold=none"
        return f"threshold{self.comparison}{self.threshold:.6g}"

    def line(self) -> str:
        return f"{self.status} {self.name} measured={self.measured:.6g} {self.threshold_text()}"

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "measured": self.measured,
            "threshold": self.threshold_text(),
            "details": self.details,
        }


def _le(name, measured, threshold, **details) -> CheckResult:
    measured = float(measured)
    return CheckResult(name, bool(measured <= threshold), measured, threshold, details=details)


# ---------------------------------------------------------------------------
# coefficient algebra


def random_stack(rng: np.random.Generator) -> FluidStack:
    """A random stably stratified stack spanning several orders of magnitude."""
    rho1 = 10 ** rng.uniform(-1, 3.5)
    return FluidStack(
        rho=rho1 * (1 + 10 ** rng.uniform(-4, 0)),
        rho1=rho1,
        h1=10 ** rng.uniform(-1, 3),
        gamma=rng.uniform(-1, 1) * 10 ** rng.uniform(-3, 0),
        gamma1=rng.uniform(-1, 1) * 10 ** rng.uniform(-3, 0),
        kappa=rng.uniform(-2, 2),
        g=rng.uniform(1, 20),
    )


def check_dispersion(seed: int, count: int = 100, tol: float = 1e-9) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst_compat = worst_ident = 0.0
    for _ in range(count):
        stack = random_stack(rng)
        for branch in (1, -1):
            c = wave_speed(stack, branch)
            worst_compat = max(worst_compat, compatibility_residual(stack, c))
            worst_ident = max(worst_ident, speed_identity_residual(stack, c))
    return [
        _le("dispersion.compatibility", worst_compat, tol, stacks=count),
        _le("dispersion.speed_identity", worst_ident, tol, stacks=count),
    ]


def check_closure(seed: int, count: int = 100, tol: float = 1e-12) -> list[CheckResult]:
    rng = np.random.default_rng(seed + 1)
    worst_b = worst_a = 0.0
    for _ in range(count):
        stack = random_stack(rng)
        for branch in (1, -1):
            c = wave_speed(stack, branch)
            alpha, beta = closure_coefficients(stack, c)
            worst_b = max(worst_b, beta_matching_residual(stack, c, beta))
            worst_a = max(worst_a, alpha_matching_residual(stack, c, alpha))
    return [
        _le("closure.beta_matching", worst_b, tol, stacks=count),
        _le("closure.alpha_matching", worst_a, tol, stacks=count),
    ]


def check_no_current(stack: FluidStack, tol: float = 1e-14) -> list[CheckResult]:
    """kappa = gamma = gamma1 = 0 must reproduce the current-free coefficients."""
    s = FluidStack(rho=stack.rho, rho1=stack.rho1, h1=stack.h1, g=stack.g)
    worst_c = worst_d = worst_n = 0.0
    for branch in (1, -1):
        c = wave_speed(s, branch)
        c_ref = branch * math.sqrt(s.h1 / s.rho1 * s.g * (s.rho - s.rho1))
        lam_disp, lam_nl = bo_coefficients(s, c)
        worst_c = max(worst_c, abs(c - c_ref) / abs(c_ref))
        worst_d = max(worst_d, abs(lam_disp - s.rho * s.h1 * c / (2 * s.rho1)) / abs(lam_disp))
        worst_n = max(worst_n, abs(lam_nl + 1.5 * c / s.h1) / abs(lam_nl))
    return [
        _le("no_current.speed", worst_c, tol),
        _le("no_current.lam_disp", worst_d, tol),
        _le("no_current.lam_nl", worst_n, tol),
    ]


# ---------------------------------------------------------------------------
# soliton


@dataclass(frozen=True)
class SolitonSetup:
    stack: FluidStack
    coeffs: DerivedCoeffs
    delta: float
    grid: PeriodicGrid
    eta0: float
    x0: float
    dt: float
    scheme: str = "rk4_integrating_factor"

    @property
    def soliton(self):
        return self.coeffs.soliton(self.eta0, self.delta)

    def exact(self, t: float) -> np.ndarray:
        return ev.soliton_exact(self.grid, t, self.eta0, self.x0, self.coeffs, self.delta)

    def exact_dt(self, t: float) -> np.ndarray:
        """Analytic time derivative of the travelling Lorentzian."""
        sol = self.soliton
        center = self.x0 + sol.speed * t
        return -sol.speed * ev.lorentzian_dx(self.grid, self.eta0, sol.C0 * sol.mu, center)


def _interior(grid: PeriodicGrid, center: float) -> np.ndarray:
    s = np.mod(grid.x - center + 0.5 * grid.length, grid.length) - 0.5 * grid.length
    return np.abs(s) < 0.25 * grid.length


def check_soliton_residual(setup: SolitonSetup, t: float = 0.0, tail_rtol: float = 1e-4, rtol: float = 1e-5) -> list[CheckResult]:
    grid, eta0 = setup.grid, setup.eta0
    tail = ev.soliton_tail_ratio(grid, eta0, setup.coeffs)
    eta = setup.exact(t)
    rhs = ev.bo_rhs(ev.SimState(t, eta, setup.delta), setup.coeffs, grid)
    res = rhs - setup.exact_dt(t)
    mask = _interior(grid, setup.x0 + setup.soliton.speed * t)
    worst = float(np.max(np.abs(res[mask]))) / abs(eta0)
    return [
        _le("soliton.tail", tail, tail_rtol, length=grid.length),
        _le("soliton.residual", worst, rtol, n=grid.n),
    ]


def _peak_speed(times, peaks, length) -> float:
    unwrapped = np.unwrap(np.asarray(peaks) * 2 * np.pi / length) * length / (2 * np.pi)
    return float(np.polyfit(np.asarray(times), unwrapped, 1)[0])


def run_soliton_propagation(setup: SolitonSetup, half_widths: float = 12.0, dt: float | None = None):
    """Integrate BO from the exact soliton until the peak has moved ``half_widths`` half-widths."""
    sol = setup.soliton
    dt = setup.dt if dt is None else dt
    T = half_widths * sol.width_b / abs(sol.speed)
    steps = max(1, int(math.ceil(T / dt)))
    config = ev.SolverConfig(dt=dt, steps=steps, scheme=setup.scheme, diagnostics_every=max(1, steps // 64))
    system = ev.BOSystem(setup.grid, setup.coeffs, setup.delta, dealias=True)
    records = []
    final = ev.integrate(
        ev.SimState(0.0, setup.exact(0.0), setup.delta),
        config,
        system,
        lambda i, s: records.append(ev.run_diagnostics(s, setup.grid, setup.stack, setup.coeffs)),
    )
    return final, records, config


def check_propagation(setup: SolitonSetup, run=None, l2_tol: float = 1e-2, speed_tol: float = 5e-3) -> list[CheckResult]:
    final, records, config = run or run_soliton_propagation(setup)
    exact = setup.exact(final.t)
    l2 = np.linalg.norm(final.eta - exact) / np.linalg.norm(exact)
    V = _peak_speed([r.t for r in records], [r.peak_x for r in records], setup.grid.length)
    sol = setup.soliton
    travelled = abs(sol.speed) * final.t / sol.width_b
    return [
        CheckResult("propagation.half_widths", travelled >= 10.0, travelled, 10.0, comparison=">="),
        _le("propagation.l2_error", l2, l2_tol, t_final=final.t),
        _le(
            "propagation.speed",
            abs(V - sol.speed) / abs(sol.speed),
            speed_tol,
            measured_speed=V,
            predicted_speed=sol.speed,
            linear_speed=setup.coeffs.c,
            speed_shift_ratio=(V - setup.coeffs.c) / (setup.delta * sol.C0),
        ),
    ]


def _hamiltonian_drift(records) -> float:
    H = np.array([r.hamiltonian for r in records])
    return float(np.max(np.abs(H - H[0])) / abs(H[0]))


def check_conservation(setup: SolitonSetup, run=None, mass_tol=1e-12, drift_tol=1e-6, ratio_min=8.0) -> list[CheckResult]:
    final, records, config = run or run_soliton_propagation(setup)
    m = np.array([r.mass for r in records])
    mass_drift = float(np.max(np.abs(m - m[0])))
    drift = _hamiltonian_drift(records)
    # a step size at which the drift is well above round-off
    system = ev.BOSystem(setup.grid, setup.coeffs, setup.delta)
    per_dt = system.cfl(1.0, setup.scheme, ev.SimState(0.0, setup.exact(0.0), setup.delta))
    dt_coarse = 1.2 / per_dt
    every = []
    for dt in (dt_coarse, dt_coarse / 2):
        _, recs, _ = _dense_run(setup, dt, final.t)
        every.append(_hamiltonian_drift(recs))
    ratio = every[0] / every[1] if every[1] > 0 else math.inf
    # momentum form, with u slaved to eta by the closure
    h_mom = [
        en.momentum_hamiltonian(
            eta, ev.closure_momentum(eta, setup.grid, setup.stack, setup.coeffs, setup.delta), setup.grid, setup.delta, setup.stack
        )
        for eta in (setup.exact(0.0), final.eta)
    ]
    mom_drift = abs(h_mom[1] - h_mom[0]) / abs(h_mom[0])
    return [
        _le("conservation.mass_drift", mass_drift, mass_tol),
        _le("conservation.hamiltonian_drift", drift, drift_tol, dt=config.dt),
        _le("conservation.momentum_hamiltonian_drift", mom_drift, drift_tol, values=h_mom),
        CheckResult(
            "conservation.dt_halving_ratio",
            bool(ratio >= ratio_min),
            float(ratio),
            ratio_min,
            comparison=">=",
            details={"dt": [dt_coarse, dt_coarse / 2], "drift": every},
        ),
    ]


def _dense_run(setup: SolitonSetup, dt: float, T: float):
    steps = max(1, int(math.ceil(T / dt)))
    config = ev.SolverConfig(dt=dt, steps=steps, scheme=setup.scheme, diagnostics_every=1)
    system = ev.BOSystem(setup.grid, setup.coeffs, setup.delta, dealias=True)
    records = []
    final = ev.integrate(
        ev.SimState(0.0, setup.exact(0.0), setup.delta),
        config,
        system,
        lambda i, s: records.append(ev.run_diagnostics(s, setup.grid, setup.stack, setup.coeffs)),
    )
    return final, records, config


# ---------------------------------------------------------------------------
# coupled model


def _cross_model_setup(stack: FluidStack, branch: int, delta_max: float):
    """A soliton narrow-band enough that the coupled system is well-posed on its support."""
    coeffs = derive(stack, branch)
    # coupled linear symbol loses well-posedness at |k| = rho1 / (delta rho h1)
    k_ill = stack.rho1 / (delta_max * stack.rho * stack.h1)
    b = k_ill / 20.0
    eta0 = 4.0 * coeffs.lam_disp * b / coeffs.lam_nl
    length = 2.0 ** math.ceil(math.log2(200.0 / b))
    n = int(2 ** math.ceil(math.log2(max(64.0, 30.0 * b * length / math.pi))))
    return coeffs, eta0, PeriodicGrid(n, length)


def _cross_model_error(stack, coeffs, grid, eta0, delta, T, dt) -> float:
    x0 = 0.25 * grid.length
    eta = ev.soliton_exact(grid, 0.0, eta0, x0, coeffs, delta)
    u = ev.closure_momentum(eta, grid, stack, coeffs, delta)
    steps = max(1, int(math.ceil(T / dt)))
    config = ev.SolverConfig(dt=T / steps, steps=steps, diagnostics_every=steps)
    coupled = ev.integrate(ev.SimState(0.0, eta, delta, u), config, ev.CoupledSystem(grid, stack, delta))
    single = ev.integrate(ev.SimState(0.0, eta, delta), config, ev.BOSystem(grid, coeffs, delta))
    return float(np.linalg.norm(coupled.eta - single.eta) / np.linalg.norm(single.eta))


def check_cross_model(stack: FluidStack, branch: int, deltas=(0.1, 0.05), window=(3.0, 5.0)) -> list[CheckResult]:
    coeffs, eta0, grid = _cross_model_setup(stack, branch, max(deltas))
    sol = coeffs.soliton(eta0, max(deltas))
    T = 10.0 * sol.width_b / abs(sol.speed)
    dt = min(0.02 * sol.width_b / abs(sol.speed), T / 200)
    errs = [_cross_model_error(stack, coeffs, grid, eta0, d, T, dt) for d in deltas]
    ratio = errs[0] / errs[1]
    lo, hi = window
    return [
        CheckResult(
            "cross_model.order_ratio",
            bool(lo <= ratio <= hi),
            float(ratio),
            lo,
            upper=hi,
            details={"deltas": list(deltas), "errors": errs, "T": T, "n": grid.n, "length": grid.length},
        )
    ]


def check_cross_model_at(stack: FluidStack, branch: int, delta: float, reference_delta: float | None = None) -> CheckResult:
    """Informational: error constant err / delta^2 at the scenario's delta.

    The profile is sized for ``reference_delta`` (default max(delta, 0.1)) and
    held fixed; sizing it per delta would make the error delta-independent,
    since the system is invariant under the matching rescaling.
    """
    ref = max(delta, 0.1) if reference_delta is None else reference_delta
    if ref < delta:
        raise ValueError("reference_delta must not be below delta")
    coeffs, eta0, grid = _cross_model_setup(stack, branch, ref)
    sol = coeffs.soliton(eta0, ref)
    T = 10.0 * sol.width_b / abs(sol.speed)
    dt = min(0.02 * sol.width_b / abs(sol.speed), T / 200)
    err = _cross_model_error(stack, coeffs, grid, eta0, delta, T, dt)
    return CheckResult(
        "cross_model.constant", True, err / delta**2, math.nan, informational=True,
        details={"delta": delta, "reference_delta": ref, "error": err},
    )


# ---------------------------------------------------------------------------
# operators and functionals


def _random_smooth(rng, grid: PeriodicGrid, modes: int, zero_mean: bool = True) -> np.ndarray:
    coef = np.zeros(grid.k.size, dtype=complex)
    coef[1 : modes + 1] = rng.normal(size=modes) + 1j * rng.normal(size=modes)
    coef[1 : modes + 1] *= np.exp(-np.arange(1, modes + 1) / (0.3 * modes))
    f = np.fft.irfft(coef, n=grid.n) * grid.n
    if not zero_mean:
        f += rng.normal()
    return f


def check_dno_truncation(h1: float, seed: int, rtol: float = 0.2, sym_tol: float = 1e-10) -> list[CheckResult]:
    grid = PeriodicGrid(64, 2 * np.pi * h1)  # k = j / h1
    worst = 0.0
    samples = []
    for delta in (0.05, 0.1):
        for j in range(1, 7):
            x = delta * h1 * grid.k[j]
            if not 0.05 <= x <= 0.3:
                continue
            f = np.cos(grid.k[j] * grid.x)
            trunc = sp.dno_upper_truncated(np.zeros(grid.n), f, grid, delta, h1)
            exact = delta * sp.flat_dno_upper_exact(f, grid, delta * h1)
            rel = np.max(np.abs(trunc - exact)) / np.max(np.abs(exact))
            pred = x * x / 3.0
            samples.append((x, rel))
            worst = max(worst, abs(rel / pred - 1.0))
    rng = np.random.default_rng(seed + 2)
    g2 = PeriodicGrid(128, 20.0 * h1)
    worst_sym = 0.0
    for _ in range(20):
        eta = 0.1 * h1 * _random_smooth(rng, g2, 20)
        f, g = _random_smooth(rng, g2, 30), _random_smooth(rng, g2, 30)
        for op in (
            lambda v: sp.dno_lower_truncated(eta, v, g2, 0.1),
            lambda v: sp.dno_upper_truncated(eta, v, g2, 0.1, h1),
        ):
            a, b = sp.inner(f, op(g), g2), sp.inner(g, op(f), g2)
            scale = max(np.linalg.norm(f) * np.linalg.norm(op(g)), np.linalg.norm(g) * np.linalg.norm(op(f))) * g2.spacing
            worst_sym = max(worst_sym, abs(a - b) / scale)
    return [
        _le("dno.upper_truncation_order", worst, rtol, samples=samples),
        _le("dno.self_adjoint", worst_sym, sym_tol),
    ]


def check_hamiltonian_assembly(stack: FluidStack, seed: int, count: int = 50, tol: float = 1e-10) -> CheckResult:
    rng = np.random.default_rng(seed + 3)
    grid = PeriodicGrid(128, 40.0 * stack.h1)
    worst = 0.0
    for _ in range(count):
        delta = rng.uniform(0.02, 0.3)
        eta = 0.2 * stack.h1 * _random_smooth(rng, grid, 16)
        xi = _random_smooth(rng, grid, 16)
        parts = en.scaled_hamiltonian(eta, xi, grid, delta, stack)
        other = en.scaled_hamiltonian_from_operators(eta, xi, grid, delta, stack)
        scale = sum(abs(v) for k, v in parts.to_record().items() if k != "total")
        worst = max(worst, abs(parts.total - other) / scale)
    return _le("hamiltonian.assembly_equivalence", worst, tol, pairs=count)


# ---------------------------------------------------------------------------
# standard form


def _standard_residual(grid, eta, amplitude, width, speed, center, sigma) -> np.ndarray:
    eta_T = -speed * ev.lorentzian_dx(grid, amplitude, width, center)
    eta_X = sp.derivative(eta, grid)
    return eta_T + 2.0 * sp.derivative(eta * eta, grid) + sigma * sp.abs_d(eta_X, grid)


def sign_audit(grid: PeriodicGrid | None = None, T: float = 0.7, magnitude: float = 1.0) -> dict:
    """Residual of eta_T + 4 eta eta_X + sigma |d_X| eta_X for every (sigma, sign C0).

    Two candidate solutions are audited: the C0-form (peak height C0, moving
    at speed C0) and the sigma-form (peak height sigma C0, moving at speed
    -sigma C0).
    """
    grid = grid or PeriodicGrid(4096, 256.0 / magnitude)
    X0 = 0.5 * grid.length
    out = {"eta_form": [], "sigma_form": []}
    for sigma in (1, -1):
        for sgn in (1, -1):
            C0 = sgn * magnitude
            forms = {
                "eta_form": (ev.eta_soliton(grid, T, C0, X0), C0, abs(C0), C0),
                "sigma_form": (ev.standard_soliton(grid, T, C0, X0, sigma), sigma * C0, abs(C0), -sigma * C0),
            }
            for key, (eta, amp, width, speed) in forms.items():
                center = X0 + speed * T
                r = _standard_residual(grid, eta, amp, width, speed, center, sigma)
                mask = _interior(grid, center)
                out[key].append(
                    {"sigma": sigma, "C0_sign": sgn, "residual": float(np.max(np.abs(r[mask])) / magnitude**3)}
                )
    return out


def predicted_consistent(form: str, sigma: int, c0_sign: int) -> bool:
    """A Lorentzian of height a travels at speed a and solves the sigma equation iff sigma*a < 0."""
    if form == "eta_form":
        return sigma * c0_sign < 0
    # height sigma*C0 but speed -sigma*C0: speed and height never agree
    return False


def check_sign_audit(consistent_tol: float = 1e-6, inconsistent_min: float = 1e-2) -> tuple[list[CheckResult], dict]:
    """Per form: the self-consistent set found must equal the predicted one, and every other
    pairing must leave a residual of at least ``inconsistent_min``.

    Returns the results and a finding ``{form: {"self_consistent": [...], "rows": [...]}}``.
    """
    audit = sign_audit()
    results, finding = [], {}
    for form, rows in audit.items():
        found = sorted((r["sigma"], r["C0_sign"]) for r in rows if r["residual"] <= consistent_tol)
        predicted = sorted((r["sigma"], r["C0_sign"]) for r in rows if predicted_consistent(form, r["sigma"], r["C0_sign"]))
        others = [r["residual"] for r in rows if (r["sigma"], r["C0_sign"]) not in found]
        worst_ok = max([r["residual"] for r in rows if (r["sigma"], r["C0_sign"]) in found], default=0.0)
        details = {"consistent": found, "predicted": predicted}
        results.append(
            CheckResult(
                f"sign_audit.{form}.consistent_set",
                bool(found == predicted),
                len(found),
                len(predicted),
                comparison="==",
                details={**details, "worst_consistent_residual": worst_ok},
            )
        )
        if found:
            results.append(_le(f"sign_audit.{form}.consistent_residual", worst_ok, consistent_tol))
        smallest = min(others, default=math.inf)
        results.append(
            CheckResult(
                f"sign_audit.{form}.separation",
                bool(smallest >= inconsistent_min),
                smallest,
                inconsistent_min,
                comparison=">=",
                details=details,
            )
        )
        finding[form] = {
            "self_consistent": [{"sigma": sg, "C0_sign": "+" if c > 0 else "-"} for sg, c in found],
            "worst_consistent_residual": worst_ok,
            "rows": rows,
        }
    return results, finding


def check_line_integral(tol: float = 1e-3) -> list[CheckResult]:
    """|integral of the standard soliton| -> pi on a long box, for both signs."""
    grid = PeriodicGrid(16384, 8192.0)
    worst = 0.0
    values = []
    for C0 in (1.0, -1.0):
        eta = ev.eta_soliton(grid, 0.0, C0, 0.5 * grid.length)
        m = en.mass(eta, grid)
        values.append(m)
        worst = max(worst, abs(abs(m) - math.pi), abs(m - math.copysign(math.pi, C0)))
    return [_le("line_integral.pi", worst, tol, integrals=values, length=grid.length)]
