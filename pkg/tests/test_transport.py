import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from starkscat import classical as cl
from starkscat import transport as tr
from starkscat.errors import DomainError
from starkscat.potentials import coulomb, gaussian, power_law, zero


def axis_point(x, eta, d=3):
    n = d - 1
    return cl.PhasePoint(np.atleast_1d(float(x)), np.zeros((1, n)), np.atleast_1d(float(eta)),
                         np.zeros((1, n)))


@pytest.fixture(scope="module")
def bare():
    return tr.SymbolSequence(coulomb(1.0, r0=0.0), order=3)


@pytest.fixture(scope="module")
def region_points():
    rng = np.random.Generator(np.random.Philox(7))
    return cl.sample_region(rng, 40, cl.InvariantRegionSpec(1, 0.25, 1), S_range=(20.0, 400.0))


@pytest.mark.parametrize("x,eta", [(10.0, 0.0), (10.0, 1.0), (100.0, 0.0), (50.0, -2.0)])
def test_b1_on_axis_closed_form(bare, x, eta):
    # int_0^inf dt / (x + eta t + t^2 / 2) with c^2 = 2x - eta^2
    c = np.sqrt(2 * x - eta**2)
    expected = 1j * (2 / c) * (np.pi / 2 - np.arctan(eta / c))
    # the tail beyond the truncation time is extrapolated, hence 1e-7
    assert bare.b(1, axis_point(x, eta))[0] == pytest.approx(expected, rel=1e-7)


def test_harmonic_potential_gives_exponential_series(bare, region_points):
    # Delta(1/r) = 0 in three dimensions, so every Laplacian term drops out
    b1 = bare.b(1, region_points)
    np.testing.assert_allclose(bare.b(2, region_points), b1**2 / 2, rtol=1e-6)


def test_b0_is_one_and_phases_alternate(region_points):
    seq = tr.SymbolSequence(coulomb(1.0), order=3)
    lay = seq.layers(region_points)
    np.testing.assert_array_equal(lay.value(0), 1.0)
    # real potential: b_k carries the phase i^k
    for k in range(1, 4):
        v = lay.value(k) / 1j**k
        assert np.max(np.abs(v.imag)) <= 1e-12 * np.max(np.abs(v))


def test_zero_potential_gives_zero_layers(region_points):
    lay = tr.SymbolSequence(zero(), order=2).layers(region_points)
    for k in (1, 2):
        assert np.all(lay.value(k) == 0)
        assert np.all(lay.q[k] == 0)


def test_outside_region_is_rejected():
    seq = tr.SymbolSequence(coulomb(1.0), order=1)
    with pytest.raises(DomainError):
        seq.b(1, axis_point(10.0, -10.0))
    with pytest.raises(DomainError):
        tr.b_next(seq, 1, axis_point(10.0, 1.0))


def test_fd_laplacian_agrees_with_engine(region_points):
    seq = tr.SymbolSequence(coulomb(1.0), order=2, engine_options={"deriv_order": 2})
    p = cl.PhasePoint(region_points.x[:8], region_points.y[:8], region_points.eta[:8],
                      region_points.zeta[:8])
    lay = seq.layers(p)
    for k in (1, 2):
        fd = tr.fd_laplacian_b(seq, k, p, 0.05)
        scale = np.max(np.abs(lay.value(k)))
        assert np.max(np.abs(fd - lay.laplacian(k))) <= 1e-4 * scale


def test_q_next_definition(region_points):
    q = coulomb(1.0)
    seq = tr.SymbolSequence(q, order=2)
    lay = seq.layers(region_points)
    expected = q.value(region_points.position) * lay.value(1) - 0.5 * lay.laplacian(1)
    np.testing.assert_allclose(tr.q_next(seq, 0, region_points), expected, rtol=1e-12)


@pytest.mark.parametrize("k", [1, 2])
def test_transport_residual_is_second_order(region_points, k):
    seq = tr.SymbolSequence(coulomb(1.0), order=2)
    res, order = tr.residual_convergence(seq, k, region_points)
    assert res[-1] <= 1e-3
    assert order == pytest.approx(2.0, abs=0.3)


@pytest.mark.parametrize("q", [coulomb(1.0), power_law(1.0, 0.8, 0.3), power_law(1.0, 1.5, 0.5)])
def test_decay_exponents(q):
    # |b_k| decays like (1 + x + <y>)^{-k(alpha - 1/2)}, at least the k delta bound
    seq = tr.SymbolSequence(q, order=2)
    e = [tr.decay_fit(seq, k).exponent for k in (1, 2)]
    for k in (1, 2):
        assert e[k - 1] >= k * q.delta - 0.1
        assert e[k - 1] == pytest.approx(k * (q.alpha - 0.5), abs=0.1 * k)


def test_decay_fit_gaussian_saturates():
    fit = tr.decay_fit(tr.SymbolSequence(gaussian(), order=1), 1)
    assert fit.saturated


def test_borel_cutoffs_zero_potential():
    C, _ = tr.borel_cutoffs(tr.SymbolSequence(zero(), order=2))
    np.testing.assert_allclose(C, (2.0, 3.15, 4.3575), rtol=1e-12)


@pytest.fixture(scope="module")
def borel_coulomb():
    seq = tr.SymbolSequence(coulomb(1.0), order=1)
    C, info = tr.borel_cutoffs(seq)
    return seq.with_cutoffs(C), C


def test_borel_cutoffs_ladder(borel_coulomb):
    seq, C = borel_coulomb
    assert C[0] == 2.0
    assert all(C[k] > 1 + C[k - 1] for k in range(1, len(C)))
    rng = np.random.Generator(np.random.Philox(11))
    p = cl.sample_region(rng, 200, seq.region, S_range=(2 * C[1] ** 2, 1e6))
    assert tr.verify_borel_bound(seq, p) <= 1.0


def test_a_B_matches_sum_deep_in_region(borel_coulomb):
    seq, C = borel_coulomb
    # far out and well inside the region all cutoffs are 1
    p = tr.ray_points(seq, [1e5], a_value=0.5)[0]
    lay = seq.layers(p)
    np.testing.assert_allclose(tr.a_B(seq, p), lay.value(0) + lay.value(1), rtol=1e-12)
    assert np.all(tr.r_k_remainder(seq, 1, p) == 0)


def test_a_B_requires_cutoffs():
    with pytest.raises(DomainError):
        tr.a_B(tr.SymbolSequence(zero(), order=1), axis_point(10.0, 1.0))


@settings(max_examples=20)
@given(st.floats(0.1, 3.0))
def test_b1_is_linear_in_coupling(kappa):
    p = axis_point(30.0, 0.5)
    one = tr.SymbolSequence(coulomb(1.0), order=1).b(1, p)
    scaled = tr.SymbolSequence(coulomb(kappa), order=1).b(1, p)
    np.testing.assert_allclose(scaled, kappa * one, rtol=1e-10)
