"""Energy functionals of the interface variables.

``xi`` is the density-weighted jump of interface potentials, stored in the
zero-mean gauge; ``u = xi_x`` is the momentum variable of the BO reduction.
All integrals use the periodic rectangle rule.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import spectral as sp
from .model_params import DerivedCoeffs, FluidStack, composite_vorticity, energy_coefficient
from .spectral import PeriodicGrid

__all__ = [
    "HamiltonianBreakdown",
    "potential_energy",
    "scaled_hamiltonian",
    "scaled_hamiltonian_from_operators",
    "momentum_hamiltonian",
    "bo_hamiltonian",
    "canonical_transform",
    "inverse_canonical_transform",
    "chi_from_eta_t",
    "mass",
]


@dataclass(frozen=True)
class HamiltonianBreakdown:
    quadratic_kinetic: float
    cubic_dispersive: float
    cubic_dno: float
    vorticity_cubic: float
    current_coupling: float
    eta_cubic: float
    eta_quadratic: float

    @property
    def total(self) -> float:
        return float(np.sum([v for v in asdict(self).values()]))

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["total"] = self.total
        return rec


def potential_energy(eta: np.ndarray, grid: PeriodicGrid, stack: FluidStack) -> float:
    return 0.5 * (stack.rho - stack.rho1) * stack.g * sp.integrate(eta**2, grid)


def mass(eta: np.ndarray, grid: PeriodicGrid) -> float:
    return sp.integrate(eta, grid)


def _eta_eta_x(eta, grid):
    return 0.5 * sp.derivative(eta**2, grid)


def scaled_hamiltonian(
    eta: np.ndarray, xi: np.ndarray, grid: PeriodicGrid, delta: float, stack: FluidStack
) -> HamiltonianBreakdown:
    """Long-wave Hamiltonian in (eta, xi), truncated after delta^3."""
    if not sp.is_zero_mean(xi):
        raise sp.ZeroMeanError("xi must be stored in the zero-mean gauge")
    rho, rho1, h1 = stack.rho, stack.rho1, stack.h1
    d2xi = sp.d_squared(xi, grid)
    I = lambda f: sp.integrate(f, grid)  # noqa: E731
    return HamiltonianBreakdown(
        quadratic_kinetic=0.5 * delta**2 * h1 / rho1 * I(xi * d2xi),
        cubic_dispersive=-0.5 * delta**3 * rho * h1**2 / rho1**2 * I(xi * sp.abs_d(d2xi, grid)),
        cubic_dno=-0.5 * delta**3 / rho1 * I(xi * sp.d_eta_d(eta, xi, grid)),
        vorticity_cubic=-(delta**3) * stack.gamma1 * I(xi * _eta_eta_x(eta, grid)),
        current_coupling=-(delta**2) * stack.kappa * I(xi * sp.derivative(eta, grid)),
        eta_cubic=delta**3 / 6.0 * (rho * stack.gamma**2 - rho1 * stack.gamma1**2) * I(eta**3),
        eta_quadratic=0.5 * delta**2 * energy_coefficient(stack) * I(eta**2),
    )


def scaled_hamiltonian_from_operators(
    eta: np.ndarray, xi: np.ndarray, grid: PeriodicGrid, delta: float, stack: FluidStack
) -> float:
    """Same Hamiltonian assembled term by term from the expanded G, G1 and B^{-1}.

    Independent of :func:`scaled_hamiltonian`: it composes the order-by-order
    operators and keeps the separate gamma and rho1 (gamma - gamma1) terms.
    """
    I = lambda f: sp.integrate(f, grid)  # noqa: E731
    G = lambda f: sp.dno_lower_terms(eta, f, grid, delta)  # noqa: E731
    G1 = sp.dno_upper_terms(eta, xi, grid, delta, stack.h1)
    Binv = lambda f: sp.b_inverse_terms(f, grid, delta, stack)  # noqa: E731
    eex = _eta_eta_x(eta, grid)
    gam, gam1, rho1 = stack.gamma, stack.gamma1, stack.rho1

    t1 = 0.5 * I(xi * G(Binv(G1[2])[-1])[1])
    t2 = 0.5 * I(xi * G(Binv(G1[2])[0])[1])
    t3 = 0.5 * I(xi * G(Binv(G1[3])[-1])[1])
    t4 = -(delta**3) * gam * I(xi * eex)
    t5 = -(delta**2) * stack.kappa * I(xi * sp.derivative(eta, grid))
    t6 = delta**3 * rho1 * (gam - gam1) * I(eex * Binv(G(xi)[1])[-1])
    t7 = delta**3 / 6.0 * (stack.rho * gam**2 - rho1 * gam1**2) * I(eta**3)
    t8 = 0.5 * delta**2 * (composite_vorticity(stack) * stack.kappa + stack.g * (stack.rho - rho1)) * I(eta**2)
    return float(np.sum([t1, t2, t3, t4, t5, t6, t7, t8]))


def momentum_hamiltonian(
    eta: np.ndarray, u: np.ndarray, grid: PeriodicGrid, delta: float, stack: FluidStack
) -> float:
    """Hamiltonian in (eta, u) after the delta^2 time rescaling."""
    rho, rho1, h1 = stack.rho, stack.rho1, stack.h1
    I = lambda f: sp.integrate(f, grid)  # noqa: E731
    return (
        0.5 * h1 / rho1 * I(u * u)
        - 0.5 * delta * rho * h1**2 / rho1**2 * I(u * sp.abs_d(u, grid))
        - 0.5 * delta / rho1 * I(eta * u * u)
        + 0.5 * delta * stack.gamma1 * I(eta * eta * u)
        + stack.kappa * I(eta * u)
        + delta / 6.0 * (rho * stack.gamma**2 - rho1 * stack.gamma1**2) * I(eta**3)
        + 0.5 * energy_coefficient(stack) * I(eta * eta)
    )


def bo_hamiltonian(eta: np.ndarray, grid: PeriodicGrid, coeffs: DerivedCoeffs, delta: float) -> float:
    """Conserved energy of the single BO equation, eta_t = d/dx (dH/d eta)."""
    I = lambda f: sp.integrate(f, grid)  # noqa: E731
    return (
        -0.5 * coeffs.c * I(eta * eta)
        + 0.5 * delta * coeffs.lam_disp * I(eta * sp.abs_d(eta, grid))
        - delta * coeffs.lam_nl / 6.0 * I(eta**3)
    )


def canonical_transform(xi: np.ndarray, eta: np.ndarray, grid: PeriodicGrid, stack: FluidStack) -> np.ndarray:
    """zeta = xi - (Gamma/2) * primitive(eta), using the zero-mean primitive."""
    return xi - 0.5 * composite_vorticity(stack) * sp.antiderivative(eta, grid)


def inverse_canonical_transform(zeta: np.ndarray, eta: np.ndarray, grid: PeriodicGrid, stack: FluidStack) -> np.ndarray:
    return zeta + 0.5 * composite_vorticity(stack) * sp.antiderivative(eta, grid)


def chi_from_eta_t(eta_t: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Interface stream function chi = -primitive(eta_t)."""
    return -sp.antiderivative(eta_t, grid)
