import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from internal_bo import spectral as sp
from internal_bo.model_params import FluidStack
from internal_bo.spectral import PeriodicGrid, RealField, ZeroMeanError

G2PI = PeriodicGrid(64, 2 * np.pi)
STACK = FluidStack(1.2, 1.0, 1.0, 0.2, 0.1, 0.1, 1.0)


def smooth_field(seed, grid=G2PI, modes=8, zero_mean=True):
    rng = np.random.default_rng(seed)
    k = np.arange(1, modes + 1)
    a, b = rng.normal(size=(2, modes)) / k
    x = grid.x[:, None] * (2 * np.pi / grid.length)
    f = (a * np.cos(k * x) + b * np.sin(k * x)).sum(axis=1)
    return f if zero_mean else f + rng.normal()


seeds = st.integers(0, 2**32 - 1)


def test_grid_basics():
    g = PeriodicGrid(128, 10.0)
    assert g.spacing * g.n == pytest.approx(g.length, rel=1e-15)
    k = g.wavenumbers
    j = np.arange(1, g.n // 2)
    assert np.array_equal(k[-j], -k[j])  # odd symmetry, Nyquist excepted
    assert g.x[0] == 0.0 and g.x[-1] < g.length
    with pytest.raises(ValueError):
        PeriodicGrid(100, 1.0)
    with pytest.raises(ValueError):
        PeriodicGrid(64, -1.0)


def test_derivative_eigenfunction():
    x = G2PI.x
    assert np.allclose(sp.derivative(np.cos(2 * x), G2PI), -2 * np.sin(2 * x), atol=1e-12)
    assert np.allclose(sp.derivative(np.full(G2PI.n, 3.0), G2PI), 0.0, atol=1e-14)


def test_derivative_vs_finite_differences():
    errs = []
    for n in (256, 512, 1024):
        g = PeriodicGrid(n, 40.0)
        f = 1.0 / ((g.x - 20.0) ** 2 + 1.0)
        fd = (np.roll(f, -1) - np.roll(f, 1)) / (2 * g.spacing)
        errs.append(np.max(np.abs(fd - sp.derivative(f, g))))
    # centred differences converge at second order towards the spectral derivative
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_abs_d_modes():
    x = G2PI.x
    assert np.allclose(sp.abs_d(np.sin(3 * x), G2PI), 3 * np.sin(3 * x), atol=1e-12)
    assert np.allclose(sp.abs_d(np.cos(x) + np.cos(4 * x), G2PI), np.cos(x) + 4 * np.cos(4 * x), atol=1e-12)


def test_abs_d_lorentzian_whole_line():
    b, L = 1.0, 2048.0
    g = PeriodicGrid(16384, L)
    s = g.x - L / 2
    f = b / (s**2 + b**2)
    exact = (b**2 - s**2) / (s**2 + b**2) ** 2
    err = np.max(np.abs(sp.abs_d(f, g) - exact))
    # periodisation error of an algebraically decaying profile is O(1/L^2)
    assert err < 1e-5


def test_abs_d_inverse_and_antiderivative_examples():
    x = G2PI.x
    assert np.allclose(sp.abs_d_inverse(np.sin(2 * x), G2PI), np.sin(2 * x) / 2, atol=1e-13)
    assert np.allclose(sp.antiderivative(np.sin(x), G2PI), -np.cos(x), atol=1e-13)
    assert np.allclose(sp.antiderivative(np.cos(3 * x), G2PI), np.sin(3 * x) / 3, atol=1e-13)
    with pytest.raises(ZeroMeanError):
        sp.abs_d_inverse(np.ones(G2PI.n), G2PI)
    with pytest.raises(ZeroMeanError):
        sp.antiderivative(np.ones(G2PI.n) + np.sin(x), G2PI)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_inverse_round_trips(seed):
    f = smooth_field(seed)
    scale = np.max(np.abs(f))
    assert np.max(np.abs(sp.abs_d_inverse(sp.abs_d(f, G2PI), G2PI) - f)) <= 1e-12 * scale
    assert np.max(np.abs(sp.derivative(sp.antiderivative(f, G2PI), G2PI) - f)) <= 1e-12 * scale
    assert np.max(np.abs(sp.antiderivative(sp.derivative(f, G2PI), G2PI) - f)) <= 1e-12 * scale


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_parseval(seed):
    f, g = smooth_field(seed, zero_mean=False), smooth_field(seed + 1, zero_mean=False)
    fh, gh = np.fft.fft(f), np.fft.fft(g)
    spectral = G2PI.length / G2PI.n**2 * np.real(np.vdot(fh, gh))
    assert sp.inner(f, g, G2PI) == pytest.approx(spectral, rel=1e-12, abs=1e-13)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_operators_map_real_to_real(seed):
    f = smooth_field(seed)
    eta = 0.1 * smooth_field(seed + 7)
    for op in (
        lambda v: sp.abs_d(v, G2PI),
        lambda v: sp.derivative(v, G2PI),
        lambda v: sp.dno_lower_truncated(eta, v, G2PI, 0.1),
    ):
        out = np.fft.ifft(np.fft.fft(op(f)))
        assert np.max(np.abs(out.imag)) <= 1e-12


def test_flat_upper_dno():
    x, h1 = G2PI.x, 0.5
    for k in (1, 2, 5):
        exact = sp.flat_dno_upper_exact(np.cos(k * x), G2PI, h1)
        assert np.allclose(exact, k * np.tanh(h1 * k) * np.cos(k * x), atol=1e-12)
    # h1 k = 1
    out = sp.flat_dno_upper_exact(np.cos(x), G2PI, 1.0)
    trunc = sp.dno_upper_truncated(np.zeros(G2PI.n), np.cos(x), G2PI, 1.0, 1.0)
    assert out[0] / trunc[0] == pytest.approx(0.76159, abs=5e-6)
    # small depth: tends to h1 k^2
    tiny = sp.flat_dno_upper_exact(np.cos(x), G2PI, 1e-4)
    assert np.allclose(tiny / 1e-4, np.cos(x), atol=1e-8)


def test_flat_interface_truncations():
    x, delta, h1 = G2PI.x, 0.1, 2.0
    zero = np.zeros(G2PI.n)
    f = np.cos(3 * x)
    assert np.allclose(sp.dno_lower_truncated(zero, f, G2PI, delta), delta * 3 * f, atol=1e-13)
    assert np.allclose(sp.dno_upper_truncated(zero, f, G2PI, delta, h1), delta**2 * h1 * 9 * f, atol=1e-13)


def test_dno_single_mode_hand_expansion():
    x, delta, eps, h1 = G2PI.x, 0.3, 0.2, 1.5
    eta, f = eps * np.cos(3 * x), np.cos(x)
    lower = sp.dno_lower_truncated(eta, f, G2PI, delta)
    upper = sp.dno_upper_truncated(eta, f, G2PI, delta, h1)
    # products expanded by hand with product-to-sum identities
    lower_hand = delta * np.cos(x) - 2 * delta**3 * eps * np.cos(2 * x)
    upper_hand = delta**2 * h1 * np.cos(x) - delta**3 * eps * (2 * np.cos(4 * x) - np.cos(2 * x))
    assert np.max(np.abs(lower - lower_hand)) <= 1e-12
    assert np.max(np.abs(upper - upper_hand)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0.01, 0.5), st.floats(0.2, 3.0))
def test_dno_self_adjoint(seed, delta, h1):
    f, g = smooth_field(seed), smooth_field(seed + 1)
    eta = 0.3 * smooth_field(seed + 2, zero_mean=False)
    for op in (
        lambda v: sp.dno_lower_truncated(eta, v, G2PI, delta),
        lambda v: sp.dno_upper_truncated(eta, v, G2PI, delta, h1),
    ):
        a, b = sp.inner(f, op(g), G2PI), sp.inner(g, op(f), G2PI)
        assert abs(a - b) <= 1e-10 * max(abs(a), abs(b), 1e-300) + 1e-15


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(-2, 2), st.floats(-2, 2))
def test_dno_superposition(seed, a, b):
    f, g = smooth_field(seed), smooth_field(seed + 1)
    e1, e2 = smooth_field(seed + 2), smooth_field(seed + 3)
    t = lambda eta, v: sp.dno_lower_terms(eta, v, G2PI, 0.2)[3]  # noqa: E731
    assert np.allclose(t(e1, a * f + b * g), a * t(e1, f) + b * t(e1, g), atol=1e-12)
    assert np.allclose(t(a * e1 + b * e2, f), a * t(e1, f) + b * t(e2, f), atol=1e-12)


def test_b_inverse_examples():
    x = G2PI.x
    # rho = 0 isolates the |D|^-1 term; not a physical stack, so it bypasses validation
    s = FluidStack(rho=0.0, rho1=1.0, h1=3.0)
    assert np.allclose(sp.b_inverse_truncated(np.sin(x), G2PI, 1.0, s), np.sin(x), atol=1e-14)
    f = smooth_field(3)
    lead = sp.b_inverse_terms(f, G2PI, 0.2, STACK)[-1]
    assert np.allclose(0.2 * STACK.rho1 * sp.abs_d(lead, G2PI), f, atol=1e-13)


def test_b_inverse_is_second_order():
    f = smooth_field(11)
    zero = np.zeros(G2PI.n)
    errs = []
    for delta in (0.02, 0.01):
        v = sp.b_inverse_truncated(f, G2PI, delta, STACK)
        back = STACK.rho1 * sp.dno_lower_truncated(zero, v, G2PI, delta) + STACK.rho * sp.dno_upper_truncated(
            zero, v, G2PI, delta, STACK.h1
        )
        errs.append(np.max(np.abs(back - f)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_dealias():
    n = 32
    g = PeriodicGrid(n, 2 * np.pi)
    x = g.x
    low = np.cos(3 * x) + np.sin(10 * x)
    assert np.allclose(sp.dealias(low, g), low, atol=1e-14)
    assert np.allclose(sp.dealias(np.cos(11 * x), g), 0.0, atol=1e-14)


@pytest.mark.parametrize("a, b", [(5, 7), (9, 10), (4, 4), (2, 8)])
def test_dealiased_product_matches_projection(a, b):
    n = 32
    g = PeriodicGrid(n, 2 * np.pi)
    x = g.x
    got = sp.dealias(np.cos(a * x) * np.cos(b * x), g)
    # exact continuous product 0.5 cos((a+b)x) + 0.5 cos((a-b)x), projected on |j| < n/3
    want = sum(0.5 * np.cos(j * x) for j in (a + b, a - b) if 3 * abs(j) < n)
    assert np.allclose(got, want, atol=1e-14)


def test_integrate():
    x = G2PI.x
    assert sp.integrate(np.cos(4 * x), G2PI) == pytest.approx(0.0, abs=1e-14)
    assert sp.integrate(np.full(G2PI.n, 2.5), G2PI) == pytest.approx(2.5 * 2 * np.pi, rel=1e-15)
    assert sp.integrate(np.cos(x) ** 2, G2PI) == pytest.approx(np.pi, rel=1e-15)


def test_csv_round_trip(tmp_path):
    g = PeriodicGrid(64, 7.3)
    f = RealField(g, smooth_field(5, g) * math.pi / 3)
    path = tmp_path / "f.csv"
    f.to_csv(path)
    assert path.read_text().splitlines()[0] == "x,value"
    back = RealField.from_csv(path)
    assert back.grid.n == g.n and back.grid.length == pytest.approx(g.length, rel=1e-14)
    assert np.array_equal(back.values, f.values)
    with pytest.raises(ValueError):
        sp.read_field_csv(path, PeriodicGrid(32, 7.3))


def test_real_field_rejects_bad_samples():
    with pytest.raises(ValueError):
        RealField(G2PI, np.zeros(10))
    with pytest.raises(ValueError):
        RealField(G2PI, np.full(G2PI.n, np.nan))
    assert RealField(G2PI, np.sin(G2PI.x)).is_zero_mean
    assert not RealField(G2PI, np.ones(G2PI.n)).is_zero_mean
