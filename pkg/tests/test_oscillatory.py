import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import airy

from starkscat import oscillatory as osc
from starkscat.errors import AccuracyError, DomainError

# 2^{1/3} 2 pi Ai(-2^{1/3} u), computed independently at 30 digits
AIRY_FROZEN = [(0.0, 2.8105147707426159), (-3.0, 0.011784815909444312),
               (2.5, -3.2655625760169296)]


@pytest.mark.parametrize("u,expected", AIRY_FROZEN)
def test_airy_integral_frozen_values(u, expected):
    assert osc.airy_eta_integral(u) == pytest.approx(expected, rel=1e-12)
    assert osc.airy_eta_contour(u) == pytest.approx(expected, rel=1e-9)


def test_contour_quadrature_agrees_with_airy():
    u = np.linspace(-5, 10, 151)
    ref = osc.airy_eta_integral(u)
    num = np.array([osc.airy_eta_contour(v) for v in u])
    z = -osc.CBRT2 * u
    ai, _, bi, _ = airy(z)
    env = 2 * np.pi * osc.CBRT2 * np.where(z < 0, np.hypot(ai, bi), np.abs(ai))
    assert np.max(np.abs(num - ref) / env) <= 1e-6
    assert np.all(np.isreal(ref))


@pytest.fixture
def xi():
    return osc.TransverseProfile((0.3,), 0.5)


def test_profile_support_and_peak(xi):
    assert xi(np.array([[0.3]]))[0] == pytest.approx(np.exp(-1.0))
    assert xi(np.array([[0.81]]))[0] == 0.0
    with pytest.raises(DomainError):
        osc.TransverseProfile((0.0,), 0.0)


@pytest.mark.parametrize("x,y", [(5.0, 0.7), (2.0, -1.5), (20.0, 4.0), (-1.0, 0.2)])
def test_phi_with_unit_amplitude_is_free_eigenfunction(xi, x, y):
    phi = osc.eval_phi(osc.OscIntegralSpec(), xi, x, [y])
    ref = osc.free_eigenfunction(x, [y], 0.0, xi)
    assert abs(phi.value - ref) <= 1e-5 * max(abs(ref), 1e-3)
    assert phi.tail_bound <= 1e-6


def test_phi_in_three_dimensions():
    xi = osc.TransverseProfile((0.2, -0.1), 0.4)
    phi = osc.eval_phi(osc.OscIntegralSpec(lam=0.5), xi, 4.0, [0.5, 1.0])
    ref = osc.free_eigenfunction(4.0, [0.5, 1.0], 0.5, xi)
    assert abs(phi.value - ref) <= 1e-5 * abs(ref)


def test_zero_amplitude_gives_zero(xi):
    spec = osc.OscIntegralSpec(amplitude=lambda x, y, eta, zeta: 0.0 * eta)
    assert osc.eval_phi(spec, xi, 5.0, [0.7]).value == 0


@settings(max_examples=15)
@given(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_phi_is_linear_in_amplitude(c):
    xi = osc.TransverseProfile((0.3,), 0.5)
    a = lambda x, y, eta, zeta: 1.0 / (1.0 + eta**2)  # noqa: E731
    one = osc.eval_phi(osc.OscIntegralSpec(amplitude=a), xi, 5.0, [0.7]).value
    scaled = osc.eval_phi(osc.OscIntegralSpec(amplitude=lambda *z: c * a(*z)), xi, 5.0, [0.7]).value
    assert abs(scaled - c * one) <= 1e-12 * (1 + abs(one))


def test_reflection_symmetry():
    left = osc.TransverseProfile((-0.3,), 0.5)
    right = osc.TransverseProfile((0.3,), 0.5)
    a = osc.eval_phi(osc.OscIntegralSpec(), right, 6.0, [1.1]).value
    b = osc.eval_phi(osc.OscIntegralSpec(), left, 6.0, [-1.1]).value
    assert abs(a - b) <= 1e-10


def test_tail_tolerance_is_enforced(xi):
    spec = osc.OscIntegralSpec(order=3, amp_sup=1e6, tol=1e-12, margin=1.0)
    with pytest.raises(AccuracyError):
        osc.eval_phi(spec, xi, 5.0, [0.7])


def test_stationary_points_example():
    st_ = osc.stationary_points(5.0, [3.0])
    assert st_.eta_plus == pytest.approx(3.0) and st_.eta_minus == pytest.approx(-3.0)
    np.testing.assert_allclose(st_.zeta_plus, [1.0])
    np.testing.assert_allclose(st_.zeta_minus, [-1.0])
    assert st_.h == pytest.approx(1 / np.sqrt(10))
    assert max(st_.residuals) <= 1e-12
    with pytest.raises(DomainError):
        osc.stationary_points(3.0, [3.0])
    with pytest.raises(DomainError):
        osc.stationary_points(1.0, [0.5], lam=-1.0)


@given(st.floats(1.0, 1e4), st.floats(-0.99, 0.99), st.floats(-0.5, 0.5))
def test_stationary_relations(x, t, lam):
    y = np.array([t * (x + lam)])
    s = osc.stationary_points(x, y, lam)
    for eta, zeta in ((s.eta_plus, s.zeta_plus), (s.eta_minus, s.zeta_minus)):
        assert 0.5 * eta**2 + 0.5 * zeta @ zeta == pytest.approx(x + lam, rel=1e-12)
        np.testing.assert_allclose(eta * zeta, y, rtol=1e-12, atol=1e-12)


def test_leading_asymptotics_modulus():
    xi = osc.TransverseProfile((1.2,), 1.44)
    x = 100.0
    y = np.array([1.2 * np.sqrt(2 * x)])
    h = (2 * x) ** -0.5
    plus, minus = osc.leading_asymptotics(x, y, 0.0, xi)
    assert abs(plus) == pytest.approx(h / np.sqrt(2 * np.pi) * float(xi(h * y)), rel=1e-12)
    # the minus branch sits outside the bump
    assert minus == 0


def test_hessian_on_axis_and_convergence():
    for d in (2, 3):
        A, dev, sig = osc.hessian_at_stationary(25.0, np.zeros(d - 1))
        np.testing.assert_allclose(A, -np.eye(d), atol=1e-9)
        assert sig == -d
        A, dev, sig = osc.hessian_at_stationary(25.0, np.zeros(d - 1), branch=-1)
        assert sig == d
    devs = [osc.hessian_at_stationary(x, [1.2 * np.sqrt(2 * x)])[1] for x in (25.0, 100.0, 400.0)]
    # O(h): the deviation halves when x quadruples
    assert devs[1] / devs[0] == pytest.approx(0.5, abs=0.05)
    assert devs[2] / devs[1] == pytest.approx(0.5, abs=0.05)
