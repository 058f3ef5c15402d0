import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import integrate

from starkscat import born_kernel as bk
from starkscat.errors import DomainError
from starkscat.potentials import coulomb, gaussian, power_law, zero

# frozen 30-digit values of 2^{-3/2} * 4 int_0^inf (u^4 + 1)^{-alpha/2} du
C1_FROZEN = [(0.8, 3.5946179480099026), (1.0, 2.6220575542921198),
             (1.5, 1.8540746773013719), (2.0, 1.5707963267948966)]
ELEBND_FROZEN = [(1.0, 0.0, np.pi / 2), (1.5, 0.0, 1.0), (2.0, 1.0, 0.5),
                 (1.25, 0.5, 1.1981402347355922)]


def ray(r, d=3):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    y = np.zeros(r.shape + (d - 1,))
    y[..., 0] = r
    return y


def test_t_psym_bare_coulomb_frozen_value():
    t = bk.t_psym(ray(1.0)[0], coulomb(1.0, r0=0.0))
    assert t == pytest.approx(-5.2441151085842396j, rel=1e-9)


@pytest.mark.parametrize("q", [coulomb(1.0), power_law(0.7, 0.8, 0.3), gaussian(2.0, width=1.5)])
def test_t_psym_is_imaginary_for_real_potentials(q):
    t = bk.t_psym(ray(np.geomspace(0.5, 300, 12)), q)
    assert np.all(t.real == 0)
    # the gaussian underflows to exactly 0 far out
    assert np.all(t.imag * q.kappa <= 0) and t.imag[0] * q.kappa < 0


def test_t_psym_matches_closed_form_and_scaling():
    q = power_law(1.0, 1.5, 0.5, r0=0.3)
    r = np.geomspace(0.5, 500, 10)
    np.testing.assert_allclose(bk.t_psym(ray(r), q), bk.t_psym_closed_form(ray(r), q), rtol=1e-9)
    bare = coulomb(1.0, r0=0.0)
    ratio = bk.t_psym(ray(80.0), bare) / bk.t_psym(ray(20.0), bare)
    assert ratio[0] == pytest.approx(4.0 ** (0.5 - 1.0), rel=1e-9)


def test_t_psym_edge_cases():
    assert bk.t_psym(ray(3.0)[0], zero()) == 0
    with pytest.raises(DomainError):
        bk.t_psym(ray(0.1)[0], coulomb(1.0, r0=0.0))
    # regularized potentials are fine at the origin
    assert np.isfinite(bk.t_psym(ray(0.0)[0], coulomb(1.0)))


@pytest.mark.parametrize("alpha,expected", C1_FROZEN)
def test_c1(alpha, expected):
    assert bk.c1(alpha) == pytest.approx(expected, rel=1e-13)
    assert bk.c1_integral(alpha) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("alpha,d", [(0.8, 2), (1.0, 2), (0.8, 3), (1.0, 3), (1.5, 3), (2.0, 3)])
def test_c2_against_integral(alpha, d):
    assert bk.c2(alpha, d) == pytest.approx(bk.c2_integral(alpha, d), rel=1e-8)


def test_c2_exact_value_and_poles():
    assert bk.c2(1.0, 3) == pytest.approx(-0.39894228040143268j, rel=1e-15)
    assert bk.c2(1.0, 3) == pytest.approx(-1j / np.sqrt(2 * np.pi), rel=1e-15)
    with pytest.raises(DomainError):
        bk.c2(1.5, 2)
    with pytest.raises(DomainError):
        bk.c1(0.5)


def test_fourier_power_constant_against_gaussian_limit():
    # int e^{i e.y} |y|^{-beta} dy in R^1 equals 2 Gamma(1-beta) sin(pi beta / 2)
    from scipy.special import gamma
    beta = 0.5
    assert bk.fourier_power_constant(beta, 1) == pytest.approx(
        2 * gamma(1 - beta) * np.sin(np.pi * beta / 2), rel=1e-8)


@pytest.mark.parametrize("s1,s2,expected", ELEBND_FROZEN)
def test_elebnd_constants(s1, s2, expected):
    assert bk.elebnd_constant(s1, s2) == pytest.approx(expected, rel=1e-13)


@settings(max_examples=30)
@given(st.floats(0.6, 4.0), st.floats(-0.9, 3.0), st.floats(0.05, 20.0))
def test_elebnd_scaling_property(s1, s2, f):
    assume(s2 + 1 - 2 * s1 <= -0.05)
    C = bk.elebnd_constant(s1, s2)
    assert bk.scaling_check(s1, s2, f) <= 1e-10 * C * f ** (s2 + 1 - 2 * s1)


def test_elebnd_direct_quadrature_and_domain():
    ref, _ = integrate.quad(lambda t: (t * t + 4) ** -2 * t, 0, np.inf, epsrel=1e-13)
    assert bk.elebnd_integral(2.0, 1.0, 2.0) == pytest.approx(ref, rel=1e-11)
    assert bk.scaling_exponent(1.5, 0.0) == pytest.approx(-2.0, abs=1e-10)
    with pytest.raises(DomainError):
        bk.elebnd_constant(1.0, 1.0)
    with pytest.raises(DomainError):
        bk.elebnd_constant(2.0, -1.0)


@pytest.mark.parametrize("d", [2, 3])
def test_quantization_is_linear(d):
    s = bk.separation_grid(24)
    g1 = bk.SymbolGrid.sample(lambda y: np.exp(-np.sum(y**2, -1) / 50), d, 0.02, 400.0)
    g2 = bk.SymbolGrid.sample(lambda y: 1 / (1 + np.sum(y**2, -1)), d, 0.02, 400.0)
    g3 = bk.SymbolGrid(g1.radii, 2 * g1.values - 3j * g2.values, d)
    T1 = bk.quantize_symbol(g1, s).T
    T2 = bk.quantize_symbol(g2, s).T
    T3 = bk.quantize_symbol(g3, s).T
    np.testing.assert_allclose(T3, 2 * T1 - 3j * T2, atol=1e-12 * np.max(np.abs(T1)))
    # a real radial symbol gives a real kernel
    assert np.max(np.abs(T1.imag)) <= 1e-14 * np.max(np.abs(T1))


def test_quantization_of_zero_symbol():
    g = bk.SymbolGrid.sample(lambda y: np.zeros(y.shape[0]), 3, 0.02, 400.0)
    assert np.all(bk.quantize_symbol(g, bk.separation_grid(16)).T == 0)


def test_symbol_grid_range_check():
    g = bk.SymbolGrid.sample(lambda y: np.ones(y.shape[0]), 3, 0.1, 10.0)
    with pytest.raises(DomainError):
        g(20.0)
    with pytest.raises(DomainError):
        bk.SymbolGrid(np.array([1.0, 2.0]), np.ones(2), 4)


@pytest.fixture(scope="module")
def coulomb_fit():
    return bk.diagonal_singularity(coulomb(1.0), 3)


def test_diagonal_singularity_coulomb(coulomb_fit):
    fit = coulomb_fit
    assert fit.singular
    assert fit.exponent == pytest.approx(-1.5, abs=0.05)
    target = bk.c2(1.0, 3)
    assert abs(fit.coefficient / target - 1) <= 0.05
    assert fit.drift < 0.02


def test_diagonal_singularity_is_linear_in_coupling(coulomb_fit):
    fit = bk.diagonal_singularity(coulomb(-2.0), 3)
    assert fit.exponent == pytest.approx(coulomb_fit.exponent, abs=1e-10)
    assert fit.coefficient == pytest.approx(-2 * coulomb_fit.coefficient, rel=1e-9)


def test_zero_potential_kernel_is_not_singular():
    fit = bk.diagonal_singularity(zero(), 3)
    assert not fit.singular and fit.coefficient == 0


def test_fit_singularity_on_exact_power():
    s = bk.separation_grid()
    fit = bk.fit_singularity(s, 2j * s**-1.3)
    assert fit.exponent == pytest.approx(-1.3, abs=1e-10)
    assert fit.coefficient == pytest.approx(2j, rel=1e-6)
    assert fit.singular and fit.residual < 1e-10
    with pytest.raises(DomainError):
        bk.fit_singularity(s, s**-1.0, window=(0.01, 0.5))


def test_symbol_order_fit():
    q = coulomb(1.0, r0=0.0)
    fit = bk.symbol_order_fit(lambda y: bk.t_psym(y, q), -0.5)
    assert fit.ok
    for k in (0, 1, 2):
        assert fit.orders[k] == pytest.approx(-0.5 - k, abs=0.05)
    assert bk.symbol_order_fit(lambda y: bk.t_psym(y, power_law(1.0, 1.5, 0.5, r0=0.0)), -1.0).ok
    const = bk.symbol_order_fit(lambda y: np.ones(y.shape[0]), 0.0)
    assert const.ok and const.orders[1] == -np.inf and const.orders[2] == -np.inf
    assert not bk.symbol_order_fit(lambda y: bk.t_psym(y, q), -1.0).ok


def test_born_window():
    x = np.array([1.0, 1e2, 1e6])
    eps = bk.born_window(x)
    assert eps[0] == pytest.approx(0.35 * np.sqrt(2))
    assert eps[2] == pytest.approx(6 * 2e6 ** -0.25)


def test_born_refinement():
    q = coulomb(1.0)
    zeta = [0.5, 0.0]
    assert bk.born_symbol_refinement(zeta, zeta, [100.0, 0.0], zero()).value == 0
    errs = []
    for r in (100.0, 200.0):
        y = np.array([r, 0.0])
        val = bk.born_symbol_refinement(zeta, zeta, y, q).value
        errs.append(abs(val / bk.t_psym(y, q) - 1))
        flipped = bk.born_symbol_refinement(zeta, zeta, y, coulomb(-1.0)).value
        assert flipped == pytest.approx(-val, rel=1e-12)
    assert errs[0] <= 0.1 and errs[1] < errs[0]


def test_born_refinement_domain():
    with pytest.raises(DomainError):
        bk.born_symbol_refinement([0.5], [0.5, 0.0], [100.0, 0.0], coulomb(1.0))
    with pytest.raises(DomainError):
        bk.born_symbol_refinement([2.0, 0.0], [2.0, 0.0], [100.0, 0.0], coulomb(1.0), R=1.0)
