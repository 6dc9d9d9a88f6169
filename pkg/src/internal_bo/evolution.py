"""Time integration of the BO equation and of the coupled (eta, u) system.

Both systems are advanced in Fourier space (real transform). The zero mode of
every right-hand side is identically zero, so the mass is carried through a
run untouched. The linear part is either propagated exactly
(integrating-factor RK4) or stepped together with the nonlinearity (plain RK4).

Quadratic terms are written as x-derivatives of dealiased products, e.g.
``eta eta_x = (P[eta^2] / 2)_x``. With the state band-limited to the retained
modes this makes the semi-discrete Hamiltonians exact invariants, so any drift
seen in a run is time-stepping error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import expm

from . import spectral as sp
from .energetics import bo_hamiltonian, mass, momentum_hamiltonian
from .model_params import DerivedCoeffs, FluidStack, composite_vorticity, energy_coefficient
from .spectral import PeriodicGrid

__all__ = [
    "SCHEMES",
    "SolverConfig",
    "SimState",
    "DiagnosticsRecord",
    "BlowUpError",
    "CFLError",
    "BOSystem",
    "CoupledSystem",
    "bo_rhs",
    "coupled_rhs",
    "closure_momentum",
    "step",
    "integrate",
    "lorentzian",
    "lorentzian_dx",
    "soliton_exact",
    "soliton_tail_ratio",
    "standard_soliton",
    "eta_soliton",
    "track_peak",
    "run_diagnostics",
]

SCHEMES = ("rk4_integrating_factor", "rk4_plain")
# RK4 reaches 2*sqrt(2) on the imaginary axis
DEFAULT_CFL_MAX = 2.5


class BlowUpError(RuntimeError):
    def __init__(self, message: str, t_last_valid: float):
        super().__init__(message)
        self.t_last_valid = t_last_valid


class CFLError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    steps: int
    scheme: str = "rk4_integrating_factor"
    dealias: bool = True
    diagnostics_every: int = 1
    cfl_max: float = DEFAULT_CFL_MAX
    blowup_factor: float = 1e6

    def __post_init__(self):
        if not (isinstance(self.dt, (int, float)) and math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if isinstance(self.steps, bool) or int(self.steps) != self.steps or self.steps < 0:
            raise ValueError(f"steps must be a non-negative integer, got {self.steps!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if int(self.diagnostics_every) != self.diagnostics_every or self.diagnostics_every < 1:
            raise ValueError("diagnostics_every must be a positive integer")

    def to_dict(self) -> dict:
        return {
            "dt": self.dt,
            "steps": int(self.steps),
            "scheme": self.scheme,
            "dealias": self.dealias,
            "diagnostics_every": int(self.diagnostics_every),
        }


@dataclass(frozen=True, eq=False)
class SimState:
    t: float
    eta: np.ndarray
    delta: float
    u: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta!r}")
        fields = [self.eta] if self.u is None else [self.eta, self.u]
        if any(not np.all(np.isfinite(f)) for f in fields):
            raise ValueError("state contains non-finite samples")


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    hamiltonian: float
    l2: float
    peak_x: float
    peak_h: float

    KEYS = ("t", "mass", "hamiltonian", "l2", "peak_x", "peak_h")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.KEYS}

    def to_json(self) -> str:
        return "{" + ", ".join(f'"{k}": {float(getattr(self, k)):.17g}' for k in self.KEYS) + "}"


# ---------------------------------------------------------------------------
# systems
#
# ``linear_full`` is the linear operator on every resolved mode; ``retained``
# marks the modes the integrator keeps; ``nonlinear(v)`` uses dealiased
# products when the system was built with ``dealias=True``.


class BOSystem:
    """eta_t = -c eta_x + delta lam_disp |D| eta_x - delta lam_nl eta eta_x."""

    nfields = 1

    def __init__(self, grid: PeriodicGrid, coeffs: DerivedCoeffs, delta: float, dealias: bool = True):
        self.grid, self.coeffs, self.delta, self.dealias = grid, coeffs, delta, dealias
        mask = grid.dealias_mask if dealias else np.ones_like(grid.k)
        self.retained = mask
        symbol = grid.ik * (delta * coeffs.lam_disp * grid.k - coeffs.c)
        self.linear_full = symbol[:, None, None]
        self._nl = -delta * coeffs.lam_nl * grid.ik * mask

    def nonlinear(self, v: np.ndarray) -> np.ndarray:
        eta = np.fft.irfft(v[0], n=self.grid.n)
        return (self._nl * np.fft.rfft(0.5 * eta * eta))[None, :]

    def to_hat(self, state: SimState) -> np.ndarray:
        return np.fft.rfft(state.eta)[None, :]

    def from_hat(self, v: np.ndarray, t: float, delta: float) -> SimState:
        return SimState(t=t, eta=np.fft.irfft(v[0], n=self.grid.n), delta=delta)

    def cfl(self, dt: float, scheme: str, state: SimState) -> float:
        k, c = self.grid.kmax, self.coeffs
        if scheme == "rk4_plain":
            # the current kappa is already contained in c
            return dt * k * (abs(c.c) + self.delta * abs(c.lam_disp) * k)
        return dt * k * self.delta * abs(c.lam_nl) * float(np.max(np.abs(state.eta), initial=0.0))


def _coupled_linear(grid: PeriodicGrid, stack: FluidStack, delta: float) -> tuple[np.ndarray, np.ndarray]:
    rho, rho1, h1 = stack.rho, stack.rho1, stack.h1
    ik = grid.ik
    Gam, A, kap = composite_vorticity(stack), energy_coefficient(stack), stack.kappa
    a = h1 / rho1 - delta * rho * h1**2 / rho1**2 * grid.k
    M = np.zeros((grid.k.size, 2, 2), dtype=complex)
    M[:, 0, 0] = -ik * kap
    M[:, 0, 1] = -ik * a
    # u_t carries -Gamma eta_t
    M[:, 1, 0] = -ik * A - Gam * M[:, 0, 0]
    M[:, 1, 1] = -ik * kap - Gam * M[:, 0, 1]
    return M, a


class CoupledSystem:
    """Leading-order (eta, u) system with the -Gamma eta_t term substituted explicitly.

    The truncated |D| correction makes the linear problem ill-posed wherever
    ``h1/rho1 - delta rho h1^2 |k| / rho1^2 <= 0``; those modes are never
    retained.
    """

    nfields = 2

    def __init__(self, grid: PeriodicGrid, stack: FluidStack, delta: float, dealias: bool = True):
        self.grid, self.stack, self.delta, self.dealias = grid, stack, delta, dealias
        self.linear_full, a = _coupled_linear(grid, stack, delta)
        mask = grid.dealias_mask if dealias else np.ones_like(grid.k)
        self.retained = mask * (a > 0)
        self._ik = grid.ik * mask
        self._gamma = composite_vorticity(stack)
        self._cubic = stack.rho * stack.gamma**2 - stack.rho1 * stack.gamma1**2

    @property
    def ill_posed_modes(self) -> int:
        _, a = _coupled_linear(self.grid, self.stack, self.delta)
        return int(np.sum(a <= 0))

    def nonlinear(self, v: np.ndarray) -> np.ndarray:
        n, d, s = self.grid.n, self.delta, self.stack
        eta = np.fft.irfft(v[0], n=n)
        u = np.fft.irfft(v[1], n=n)
        eu = np.fft.rfft(eta * u)
        ee = np.fft.rfft(0.5 * eta * eta)
        uu = np.fft.rfft(0.5 * u * u)
        n_eta = self._ik * (d / s.rho1 * eu - d * s.gamma1 * ee)
        n_u = self._ik * (d / s.rho1 * uu - d * s.gamma1 * eu - d * self._cubic * ee) - self._gamma * n_eta
        return np.stack([n_eta, n_u])

    def to_hat(self, state: SimState) -> np.ndarray:
        if state.u is None:
            raise ValueError("the coupled system needs both eta and u")
        return np.stack([np.fft.rfft(state.eta), np.fft.rfft(state.u)])

    def from_hat(self, v: np.ndarray, t: float, delta: float) -> SimState:
        n = self.grid.n
        return SimState(t=t, eta=np.fft.irfft(v[0], n=n), u=np.fft.irfft(v[1], n=n), delta=delta)

    def cfl(self, dt: float, scheme: str, state: SimState) -> float:
        k, s, d = self.grid.kmax, self.stack, self.delta
        em = float(np.max(np.abs(state.eta), initial=0.0))
        um = float(np.max(np.abs(state.u), initial=0.0))
        # crude bound on the flux Jacobian of the quadratic terms
        nl = d * ((um + em) / s.rho1 + abs(s.gamma1) * (um + em) + abs(self._cubic) * em) * (1 + abs(self._gamma))
        if scheme == "rk4_plain":
            lam = np.abs(np.linalg.eigvals(self.linear_full * self.retained[:, None, None]))
            return dt * float(np.max(lam)) + dt * k * nl
        return dt * k * nl


def _matvec(M: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("kij,jk->ik", M, v)


def _full_rhs_hat(system, v: np.ndarray) -> np.ndarray:
    out = _matvec(system.linear_full, v) + system.nonlinear(v)
    out[:, 0] = 0.0
    return out


def bo_rhs(state: SimState, coeffs: DerivedCoeffs, grid: PeriodicGrid, dealias: bool = True) -> np.ndarray:
    system = BOSystem(grid, coeffs, state.delta, dealias=dealias)
    return np.fft.irfft(_full_rhs_hat(system, system.to_hat(state))[0], n=grid.n)


def coupled_rhs(
    state: SimState, stack: FluidStack, grid: PeriodicGrid, dealias: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    system = CoupledSystem(grid, stack, state.delta, dealias=dealias)
    out = _full_rhs_hat(system, system.to_hat(state))
    return np.fft.irfft(out[0], n=grid.n), np.fft.irfft(out[1], n=grid.n)


def closure_momentum(
    eta: np.ndarray, grid: PeriodicGrid, stack: FluidStack, coeffs: DerivedCoeffs, delta: float
) -> np.ndarray:
    """u = (rho1/h1)(c - kappa) eta + delta alpha eta^2 + delta beta |D| eta."""
    lead = stack.rho1 / stack.h1 * (coeffs.c - stack.kappa)
    return lead * eta + delta * coeffs.alpha * eta**2 + delta * coeffs.beta * sp.abs_d(eta, grid)


# ---------------------------------------------------------------------------
# time stepping


class _Stepper:
    """Fourier-space RK4 for a fixed system and dt."""

    def __init__(self, system, config: SolverConfig):
        self.system, self.config = system, config
        self.retained = system.retained
        L = system.linear_full * system.retained[:, None, None]
        self.L = L
        if config.scheme == "rk4_integrating_factor":
            self.E = _propagator(system, L, config.dt / 2)
            self.E2 = _propagator(system, L, config.dt)

    def nonlinear(self, v):
        out = self.system.nonlinear(v) * self.retained
        out[:, 0] = 0.0
        return out

    def __call__(self, v: np.ndarray) -> np.ndarray:
        h = self.config.dt
        N = self.nonlinear
        if self.config.scheme == "rk4_integrating_factor":
            E, E2 = self.E, self.E2
            a = N(v)
            b = N(_matvec(E, v + 0.5 * h * a))
            c = N(_matvec(E, v) + 0.5 * h * b)
            d = N(_matvec(E2, v) + h * _matvec(E, c))
            w = _matvec(E2, v) + h / 6.0 * (_matvec(E2, a) + 2.0 * _matvec(E, b + c) + d)
        else:
            def f(x):
                return _matvec(self.L, x) + N(x)

            k1 = f(v)
            k2 = f(v + 0.5 * h * k1)
            k3 = f(v + 0.5 * h * k2)
            k4 = f(v + h * k3)
            w = v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        # the zero mode is carried over bit-for-bit
        w[:, 0] = v[:, 0]
        return w


def _propagator(system, L: np.ndarray, t: float) -> np.ndarray:
    if system.nfields == 1:
        return np.exp(L * t)
    return expm(L * t)


def _check_cfl(system, config: SolverConfig, state: SimState) -> None:
    number = system.cfl(config.dt, config.scheme, state)
    if number > config.cfl_max:
        raise CFLError(f"time step too large: CFL number {number:.3g} exceeds {config.cfl_max}")


def step(state: SimState, config: SolverConfig, system) -> SimState:
    """One RK4 step of ``system`` from ``state``."""
    _check_cfl(system, config, state)
    v = system.to_hat(state) * system.retained
    w = _Stepper(system, config)(v)
    new = _finite_state(system, w, state.t + config.dt, state.delta, state.t)
    return new


def _finite_state(system, w, t, delta, t_prev) -> SimState:
    if not np.all(np.isfinite(w)):
        raise BlowUpError(f"non-finite values at t={t:.6g}", t_prev)
    return system.from_hat(w, t, delta)


def integrate(
    state: SimState,
    config: SolverConfig,
    system,
    observer: Callable[[int, SimState], None] | None = None,
    observe_steps: set[int] | None = None,
) -> SimState:
    """Run ``config.steps`` steps.

    ``observer(i, state)`` is called at step 0, every ``diagnostics_every``
    steps, at the last step and at any step listed in ``observe_steps``.
    """
    _check_cfl(system, config, state)
    stepper = _Stepper(system, config)
    v = system.to_hat(state) * system.retained
    amp0 = max(float(np.max(np.abs(np.fft.irfft(v, n=system.grid.n)))), np.finfo(float).tiny)
    limit = config.blowup_factor * amp0
    extra = observe_steps or set()
    t0, dt, delta = state.t, config.dt, state.delta
    current = system.from_hat(v, t0, delta)
    if observer:
        observer(0, current)
    t_prev = t0
    for i in range(1, int(config.steps) + 1):
        v = stepper(v)
        t = t0 + i * dt
        if (
            i % config.diagnostics_every == 0
            or i == config.steps
            or i in extra
        ):
            current = _finite_state(system, v, t, delta, t_prev)
            peak = max(float(np.max(np.abs(current.eta))), float(np.max(np.abs(current.u))) if current.u is not None else 0.0)
            if peak > limit:
                raise BlowUpError(f"amplitude {peak:.3g} exceeds blow-up limit {limit:.3g} at t={t:.6g}", t_prev)
            if observer:
                observer(i, current)
            t_prev = t
        elif not np.all(np.isfinite(v)):
            raise BlowUpError(f"non-finite values at t={t:.6g}", t_prev)
    return system.from_hat(v, t0 + config.steps * dt, delta)


# ---------------------------------------------------------------------------
# exact solutions


def _wrapped_offset(grid: PeriodicGrid, center: float) -> np.ndarray:
    """x - center mapped to the nearest periodic image in [-L/2, L/2)."""
    L = grid.length
    return np.mod(grid.x - center + 0.5 * L, L) - 0.5 * L


def lorentzian(grid: PeriodicGrid, amplitude: float, b: float, center: float) -> np.ndarray:
    s = _wrapped_offset(grid, center)
    return amplitude / ((b * s) ** 2 + 1.0)


def lorentzian_dx(grid: PeriodicGrid, amplitude: float, b: float, center: float) -> np.ndarray:
    s = _wrapped_offset(grid, center)
    return -2.0 * amplitude * b * b * s / ((b * s) ** 2 + 1.0) ** 2


def soliton_exact(
    grid: PeriodicGrid, t: float, eta0: float, x0: float, coeffs: DerivedCoeffs, delta: float
) -> np.ndarray:
    """eta0 / (C0^2 mu^2 (x - x0 - V t)^2 + 1), V = c + delta C0, nearest image only."""
    sol = coeffs.soliton(eta0, delta)
    return lorentzian(grid, eta0, sol.C0 * sol.mu, x0 + sol.speed * t)


def soliton_tail_ratio(grid: PeriodicGrid, eta0: float, coeffs: DerivedCoeffs) -> float:
    """|eta| at half a period from the peak, relative to |eta0|."""
    sol = coeffs.soliton(eta0, 0.0)
    b = sol.C0 * sol.mu
    return 1.0 / ((b * 0.5 * grid.length) ** 2 + 1.0)


def standard_soliton(grid: PeriodicGrid, T: float, C0: float, X0: float, sigma: int) -> np.ndarray:
    """sigma C0 / (C0^2 (X - X0 + sigma C0 T)^2 + 1), taken literally; see the sign audit."""
    return lorentzian(grid, sigma * C0, abs(C0), X0 - sigma * C0 * T)


def eta_soliton(grid: PeriodicGrid, T: float, C0: float, X0: float) -> np.ndarray:
    """C0 / (C0^2 (X - C0 T - X0)^2 + 1)."""
    return lorentzian(grid, C0, abs(C0), X0 + C0 * T)


# ---------------------------------------------------------------------------
# diagnostics


def track_peak(eta: np.ndarray, grid: PeriodicGrid) -> tuple[float, float]:
    """Position and height of the dominant extremum by parabolic interpolation."""
    eta = np.asarray(eta, dtype=float)
    if np.ptp(eta) == 0.0:
        raise ValueError("flat field has no unique extremum")
    i = int(np.argmax(np.abs(eta)))
    sign = 1.0 if eta[i] > 0 else -1.0
    f = sign * eta
    i = int(np.argmax(f))
    fm, f0, fp = f[(i - 1) % grid.n], f[i], f[(i + 1) % grid.n]
    curv = fm - 2.0 * f0 + fp
    if curv == 0.0:
        offset, height = 0.0, f0
    else:
        offset = 0.5 * (fm - fp) / curv
        height = f0 - 0.125 * (fm - fp) ** 2 / curv
    x = (grid.x[i] + offset * grid.spacing) % grid.length
    return float(x), float(sign * height)


def run_diagnostics(
    state: SimState,
    grid: PeriodicGrid,
    stack: FluidStack,
    coeffs: DerivedCoeffs,
) -> DiagnosticsRecord:
    """Mass, Hamiltonian, L2 norm and peak of ``state``.

    The Hamiltonian is the conserved one of whichever model the state
    belongs to: the momentum form for (eta, u), the BO energy for eta alone.
    """
    eta = state.eta
    if state.u is None:
        ham = bo_hamiltonian(eta, grid, coeffs, state.delta)
    else:
        ham = momentum_hamiltonian(eta, state.u, grid, state.delta, stack)
    try:
        px, ph = track_peak(eta, grid)
    except ValueError:
        px, ph = 0.0, 0.0
    return DiagnosticsRecord(
        t=float(state.t),
        mass=mass(eta, grid),
        hamiltonian=float(ham),
        l2=sp.integrate(eta * eta, grid),
        peak_x=px,
        peak_h=ph,
    )
