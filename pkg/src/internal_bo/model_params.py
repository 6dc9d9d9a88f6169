"""Physical parameters of the two-layer stack and the closed-form BO coefficients.

The lower layer (density ``rho``, vorticity ``gamma``) is infinitely deep; the
upper layer (density ``rho1``, vorticity ``gamma1``, depth ``h1``) sits under a
flat lid. Both layers share the current ``kappa`` at the interface level y=0.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

__all__ = [
    "FluidStack",
    "DerivedCoeffs",
    "SolitonParams",
    "InvalidStackError",
    "DegenerateDenominatorError",
    "PolarityError",
    "validate",
    "parse_branch",
    "composite_vorticity",
    "energy_coefficient",
    "wave_speed",
    "closure_coefficients",
    "bo_coefficients",
    "soliton_params",
    "derive",
    "relative_residual",
]

# |W| below this fraction of rho1*|c - kappa| is treated as resonant.
DEGENERATE_W_RTOL = 1e-10
SELF_CHECK_RTOL = 1e-9


class InvalidStackError(ValueError):
    """A FluidStack violates one of its physical constraints."""


class DegenerateDenominatorError(ArithmeticError):
    """W = 2 rho1 (c - kappa) + h1 Gamma vanishes."""


class PolarityError(ValueError):
    """Soliton amplitude has the wrong sign for this parameter regime."""


@dataclass(frozen=True)
class FluidStack:
    rho: float
    rho1: float
    h1: float
    gamma: float = 0.0
    gamma1: float = 0.0
    kappa: float = 0.0
    g: float = 9.81

    def to_dict(self) -> dict:
        return asdict(self)


def validate(stack: FluidStack) -> FluidStack:
    """Return ``stack`` unchanged, or raise InvalidStackError naming the constraint."""
    for name, value in asdict(stack).items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise InvalidStackError(f"{name} must be a real number, got {value!r}")
        if not math.isfinite(value):
            raise InvalidStackError(f"{name} must be finite, got {value!r}")
    if stack.rho1 <= 0:
        raise InvalidStackError(f"rho1 must be positive, got {stack.rho1}")
    if stack.h1 <= 0:
        raise InvalidStackError(f"h1 must be positive, got {stack.h1}")
    if stack.g <= 0:
        raise InvalidStackError(f"g must be positive, got {stack.g}")
    if not stack.rho > stack.rho1:
        raise InvalidStackError(
            f"unstable stratification: rho={stack.rho} must exceed rho1={stack.rho1}"
        )
    return stack


def parse_branch(branch) -> int:
    """Map '+', '-', +1 or -1 to +1/-1."""
    if branch in ("+", "+1", 1):
        return 1
    if branch in ("-", "-1", -1):
        return -1
    raise ValueError(f"branch must be '+' or '-', got {branch!r}")


def composite_vorticity(stack: FluidStack) -> float:
    return stack.rho * stack.gamma - stack.rho1 * stack.gamma1


def energy_coefficient(stack: FluidStack) -> float:
    """A = Gamma kappa + g (rho - rho1), the coefficient of the eta^2 energy."""
    return composite_vorticity(stack) * stack.kappa + stack.g * (stack.rho - stack.rho1)


def relative_residual(*terms: float) -> float:
    """|sum(terms)| scaled by the sum of their magnitudes."""
    scale = sum(abs(t) for t in terms)
    if scale == 0.0:
        return 0.0
    return abs(math.fsum(terms)) / scale


def wave_speed(stack: FluidStack, branch) -> float:
    """Linear long-wave speed for the chosen branch.

    With s = c - kappa the compatibility condition is the quadratic
    s^2 + 2 p s - q = 0, p = h1 Gamma / (2 rho1), q = (h1/rho1) g (rho - rho1).
    The root without cancellation is taken directly and the other one from the
    product of roots, so both branches keep full relative accuracy.
    """
    sign = parse_branch(branch)
    validate(stack)
    p = stack.h1 * composite_vorticity(stack) / (2.0 * stack.rho1)
    q = stack.h1 / stack.rho1 * stack.g * (stack.rho - stack.rho1)
    root = math.sqrt(p * p + q)
    if p >= 0.0:
        s_minus = -p - root
        s_plus = -q / s_minus
    else:
        s_plus = -p + root
        s_minus = -q / s_plus
    return stack.kappa + (s_plus if sign > 0 else s_minus)


def _denominator(stack: FluidStack, c: float) -> float:
    s = c - stack.kappa
    w = 2.0 * stack.rho1 * s + stack.h1 * composite_vorticity(stack)
    if abs(w) < DEGENERATE_W_RTOL * stack.rho1 * max(abs(s), 1.0):
        raise DegenerateDenominatorError(
            f"degenerate denominator W = 2 rho1 (c - kappa) + h1 Gamma = {w!r}"
        )
    return w


def closure_coefficients(stack: FluidStack, c: float) -> tuple[float, float]:
    """(alpha, beta) of the momentum closure u = (rho1/h1)(c-kappa) eta + delta alpha eta^2 + delta beta |D| eta."""
    rho, rho1, h1 = stack.rho, stack.rho1, stack.h1
    gam, gam1 = stack.gamma, stack.gamma1
    G = composite_vorticity(stack)
    s = c - stack.kappa
    w = _denominator(stack, c)
    beta = (rho * rho1 * s**2 + rho * h1 * G * s) / w
    alpha = rho1 * (
        rho1 * s**2
        + 2.0 * h1 * G * s
        - gam1 * h1**2 * G
        + rho1 * gam1 * h1 * s
        + h1**2 * (rho * gam**2 - rho1 * gam1**2)
    ) / (2.0 * h1**2 * w)
    return alpha, beta


def bo_coefficients(stack: FluidStack, c: float) -> tuple[float, float]:
    """(lam_disp, lam_nl) in  eta_t + c eta_x - delta lam_disp |D| eta_x + delta lam_nl eta eta_x = 0."""
    rho, rho1, h1 = stack.rho, stack.rho1, stack.h1
    gam, gam1 = stack.gamma, stack.gamma1
    s = c - stack.kappa
    w = _denominator(stack, c)
    lam_disp = rho * h1 * s**2 / w
    lam_nl = (
        -3.0 * rho1 * s**2 + 3.0 * rho1 * gam1 * h1 * s + h1**2 * (rho * gam**2 - rho1 * gam1**2)
    ) / (h1 * w)
    return lam_disp, lam_nl


# ---------------------------------------------------------------------------
# matching residuals, used as self-checks and by the test-suite


def compatibility_residual(stack: FluidStack, c: float) -> float:
    s = c - stack.kappa
    r = stack.h1 / stack.rho1
    return relative_residual(s * s, -r * energy_coefficient(stack), r * composite_vorticity(stack) * c)


def speed_identity_residual(stack: FluidStack, c: float) -> float:
    """Residual of c = [kappa (rho1/h1)(c-kappa) + A] / [(rho1/h1)(c-kappa) + Gamma]."""
    a = stack.rho1 / stack.h1 * (c - stack.kappa)
    G = composite_vorticity(stack)
    return relative_residual(c * a, c * G, -stack.kappa * a, -energy_coefficient(stack))


def beta_matching_residual(stack: FluidStack, c: float, beta: float) -> float:
    """(h1/rho1) beta - (rho h1/rho1)(c-kappa) + beta (c-kappa)/((rho1/h1)(c-kappa) + Gamma).

    Evaluated after multiplying through by the denominator, expanded term by
    term, so a near-cancelling denominator does not amplify round-off.
    """
    rho, rho1, h1 = stack.rho, stack.rho1, stack.h1
    G = composite_vorticity(stack)
    s = c - stack.kappa
    return relative_residual(
        beta * s,
        h1 / rho1 * beta * G,
        -rho * s * s,
        -rho * h1 / rho1 * s * G,
        beta * s,
    )


def alpha_matching_residual(stack: FluidStack, c: float, alpha: float) -> float:
    """Residual of the eta eta_x matching condition, cleared of its denominator."""
    rho, rho1, h1 = stack.rho, stack.rho1, stack.h1
    gam, gam1 = stack.gamma, stack.gamma1
    s = c - stack.kappa
    den = rho1 / h1 * s + composite_vorticity(stack)
    lhs = [2.0 * h1 / rho1 * alpha * den, -2.0 / h1 * s * den, gam1 * den]
    rhs = [
        -2.0 * alpha * s,
        -rho1 / h1**2 * s**2,
        2.0 * rho1 * gam1 / h1 * s,
        rho * gam**2,
        -rho1 * gam1**2,
    ]
    return relative_residual(*lhs, *(-t for t in rhs))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolitonParams:
    eta0: float
    C0: float
    mu: float
    width_b: float  # half-width: eta = eta0/2 at distance width_b from the peak
    speed: float


@dataclass(frozen=True)
class DerivedCoeffs:
    Gamma: float
    A: float
    c_plus: float
    c_minus: float
    branch: int
    c: float
    alpha: float
    beta: float
    lam_disp: float
    lam_nl: float
    C0_per_eta0: float
    mu: float
    residuals: dict

    def soliton(self, eta0: float, delta: float) -> SolitonParams:
        return _soliton_from(self.c, self.lam_disp, self.lam_nl, eta0, delta)

    def table(self) -> list[tuple[str, float]]:
        return [
            ("Gamma", self.Gamma),
            ("A", self.A),
            ("c_plus", self.c_plus),
            ("c_minus", self.c_minus),
            ("c", self.c),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("lam_disp", self.lam_disp),
            ("lam_nl", self.lam_nl),
            ("mu", self.mu),
            ("C0_per_eta0", self.C0_per_eta0),
        ]


def _soliton_from(c, lam_disp, lam_nl, eta0, delta) -> SolitonParams:
    if eta0 == 0 or not math.isfinite(eta0):
        raise PolarityError(f"soliton amplitude must be finite and nonzero, got {eta0!r}")
    if lam_nl == 0:
        raise PolarityError("no soliton: nonlinear coefficient vanishes")
    width_b = 4.0 * lam_disp / (lam_nl * eta0)
    if not width_b > 0:
        want = "positive" if lam_disp / lam_nl > 0 else "negative"
        raise PolarityError(
            f"wrong soliton polarity: eta0={eta0} gives width {width_b}; "
            f"eta0 must be {want} for this regime"
        )
    C0 = eta0 * lam_nl / 4.0
    return SolitonParams(eta0=eta0, C0=C0, mu=1.0 / lam_disp, width_b=width_b, speed=c + delta * C0)


def soliton_params(stack: FluidStack, c: float, eta0: float, delta: float = 1.0) -> SolitonParams:
    """Amplitude-dependent soliton of the BO equation; speed is c + delta*C0."""
    lam_disp, lam_nl = bo_coefficients(stack, c)
    return _soliton_from(c, lam_disp, lam_nl, eta0, delta)


def derive(stack: FluidStack, branch) -> DerivedCoeffs:
    """All derived coefficients for one branch, with residual self-checks."""
    validate(stack)
    sign = parse_branch(branch)
    c_plus = wave_speed(stack, +1)
    c_minus = wave_speed(stack, -1)
    c = c_plus if sign > 0 else c_minus
    alpha, beta = closure_coefficients(stack, c)
    lam_disp, lam_nl = bo_coefficients(stack, c)
    residuals = {
        "compatibility_plus": compatibility_residual(stack, c_plus),
        "compatibility_minus": compatibility_residual(stack, c_minus),
        "speed_identity": speed_identity_residual(stack, c),
        "beta_matching": beta_matching_residual(stack, c, beta),
        "alpha_matching": alpha_matching_residual(stack, c, alpha),
    }
    bad = {k: v for k, v in residuals.items() if not v <= SELF_CHECK_RTOL}
    if bad:
        raise ArithmeticError(f"derived-coefficient self-check failed: {bad}")
    return DerivedCoeffs(
        Gamma=composite_vorticity(stack),
        A=energy_coefficient(stack),
        c_plus=c_plus,
        c_minus=c_minus,
        branch=sign,
        c=c,
        alpha=alpha,
        beta=beta,
        lam_disp=lam_disp,
        lam_nl=lam_nl,
        C0_per_eta0=lam_nl / 4.0,
        mu=1.0 / lam_disp,
        residuals=residuals,
    )
