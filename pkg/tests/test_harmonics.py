
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from laneemden.errors import ConfigurationError, DomainError, ShapeError
from laneemden.harmonics import (
    AngularGrid,
    HarmonicMode,
    assemble_harmonic,
    gegenbauer,
    harmonic_in_Xn,
    lb_eigenvalue,
    lb_residual,
    mult_full,
    mult_full_binomial,
    mult_full_factorial,
    mult_sym,
)
from oracles import binom, chebyshev_u


@pytest.mark.parametrize("j,N,expected", [(0, 5, 0), (1, 3, 2), (3, 2, 9), (4, 4, 24)])
def test_lb_eigenvalue_values(j, N, expected):
    assert lb_eigenvalue(j, N) == expected


@pytest.mark.parametrize("j,N", [(-1, 3), (2, 1), (1.5, 3)])
def test_lb_eigenvalue_rejects_bad_input(j, N):
    with pytest.raises(DomainError):
        lb_eigenvalue(j, N)


@pytest.mark.parametrize("j,N,expected", [(0, 7, 1), (2, 3, 5), (2, 4, 9), (0, 2, 1), (5, 2, 2), (3, 5, 30)])
def test_mult_full_values(j, N, expected):
    assert mult_full(j, N) == expected


def test_mult_full_both_formulas_on_2_4():
    assert mult_full_factorial(2, 4) == mult_full_binomial(2, 4) == 9


def test_factorial_form_undefined_for_planar_constant():
    assert mult_full_factorial(0, 2) is None
    assert mult_full(0, 2) == 1


@pytest.mark.parametrize("j,n,N,expected", [(2, 4, 2, 0), (4, 4, 3, 2), (2, 4, 5, 6), (0, 3, 6, 1), (3, 3, 2, 1), (1, 4, 3, 1)])
def test_mult_sym_values(j, n, N, expected):
    assert mult_sym(j, n, N) == expected


def test_mult_sym_out_of_contract():
    with pytest.raises(DomainError):
        mult_sym(5, 4, 3)
    with pytest.raises(DomainError):
        mult_sym(0, 0, 3)


@given(N=st.integers(2, 10), j=st.integers(0, 20))
def test_multiplicity_formulas_agree(N, j):
    fact = mult_full_factorial(j, N)
    if fact is not None:
        assert fact == mult_full_binomial(j, N)
    assert mult_full(j, N) >= 1


def test_multiplicity_formulas_agree_exhaustive():
    for N in range(2, 11):
        for j in range(21):
            fact = mult_full_factorial(j, N)
            assert fact is None or fact == mult_full_binomial(j, N)


def test_planar_multiplicities():
    assert [mult_full(j, 2) for j in range(6)] == [1, 2, 2, 2, 2, 2]


def test_spatial_multiplicities():
    assert [mult_full(j, 3) for j in range(6)] == [1, 3, 5, 7, 9, 11]


@given(N=st.integers(4, 10), n=st.integers(1, 20), data=st.data())
def test_symmetric_gap_identity(N, n, data):
    j = data.draw(st.integers(0, n - 1))
    assert mult_full(j, N) - mult_sym(j, n, N) == 2 * binom(N + j - 3, N - 2)


@given(N=st.integers(4, 10), n=st.integers(1, 20))
def test_opposite_parity_at_n(N, n):
    assert (mult_sym(n, n, N) + mult_full(n, N)) % 2 == 1


@given(N=st.integers(2, 10), n=st.integers(1, 20), data=st.data())
def test_mult_sym_bounded_by_full(N, n, data):
    j = data.draw(st.integers(0, n))
    assert 0 <= mult_sym(j, n, N) <= mult_full(j, N)


def test_harmonic_mode_build():
    mode = HarmonicMode.build(3, 2, n_values=(1, 2, 5))
    assert mode.lam == 6 and mode.mult_full == 5
    assert mode.mult_sym == {2: 2, 5: 1}


@pytest.mark.parametrize(
    "i,ell,k,omega,expected",
    [(0, 0, 3, 0.7, 1.0), (1, 0, 2, 0.5, 1.5), (2, 1, 0, 0.6, 1.44), (2, 0, 0, 0.3, (3 * 0.09 - 1) / 2)],
)
def test_gegenbauer_values(i, ell, k, omega, expected):
    assert gegenbauer(i, ell, k, omega) == pytest.approx(expected, abs=1e-14)


def test_gegenbauer_associated_legendre_without_phase():
    w = np.linspace(-1, 1, 41)
    # P_3^2 = 15 w (1 - w^2), no (-1)^ell factor
    assert np.allclose(gegenbauer(3, 2, 0, w), 15 * w * (1 - w * w), atol=1e-13)


@given(i=st.integers(0, 30), omega=st.floats(-1, 1))
def test_gegenbauer_k1_is_chebyshev_u(i, omega):
    assert gegenbauer(i, 0, 1, omega) == pytest.approx(float(chebyshev_u(i, omega)), abs=1e-12 * max(1, i * i))


def test_gegenbauer_k1_is_chebyshev_u_interior():
    w = np.linspace(-0.999, 0.999, 501)
    th = np.arccos(w)
    for i in range(15):
        exact = np.sin((i + 1) * th) / np.sin(th)
        assert np.max(np.abs(gegenbauer(i, 0, 1, w) - exact)) < 1e-12


def test_gegenbauer_series_coefficients():
    # coefficients of (1 - 2 x w + x^2)^(-alpha) from a direct power-series expansion
    w, k = 0.37, 2.5
    alpha = 0.5 * (1 + k)
    order = 8
    # (1 + y)^(-alpha) with y = x^2 - 2 x w, expanded to order x^order
    coeffs = np.zeros(order + 1)
    y = np.zeros(order + 1)
    y[1], y[2] = -2 * w, 1.0
    power = np.zeros(order + 1)
    power[0] = 1.0
    for t in range(order + 1):
        coeffs += _gen_binom(-alpha, t) * power
        power = np.convolve(power, y)[: order + 1]
    for i in range(order + 1):
        assert gegenbauer(i, 0, k, w) == pytest.approx(coeffs[i], rel=1e-12, abs=1e-13)


def _gen_binom(a, t):
    out = 1.0
    for s in range(t):
        out *= (a - s) / (s + 1)
    return out


def test_gegenbauer_near_endpoints_is_finite_and_accurate():
    # derivative form stays accurate at |w| -> 1 where the (1 - w^2) factor vanishes
    assert gegenbauer(5, 2, 1, 1.0) == 0.0
    assert abs(gegenbauer(4, 1, 0, 1 - 1e-12)) < 1e-4


@pytest.mark.parametrize("args", [(-1, 0, 0, 0.1), (2, 3, 0, 0.1), (2, 1, -0.5, 0.1), (2, 1, 0, 1.5)])
def test_gegenbauer_domain(args):
    with pytest.raises(DomainError):
        gegenbauer(*args)


def test_assemble_planar_cosine():
    grid = AngularGrid.uniform(2, 64)
    Y = assemble_harmonic(2, 3, {3: (1.0, 0.0)}, grid)
    assert np.allclose(Y.values, np.cos(3 * grid.phi))


def test_assemble_spatial_axisymmetric():
    grid = AngularGrid.uniform(3, 32, 20)
    Y = assemble_harmonic(3, 1, {(0,): (2.0, 0.0)}, grid)
    _, th = grid.mesh()
    assert np.allclose(Y.values, 2.0 * np.cos(th))
    assert np.allclose(Y.values, Y.values[:1])


def test_assemble_shape_errors():
    with pytest.raises(ShapeError):
        assemble_harmonic(2, 3, {2: (1, 0)}, AngularGrid.uniform(2, 16))
    with pytest.raises(ShapeError):
        assemble_harmonic(4, 2, {(3, 2): (1, 0)}, AngularGrid.uniform(4, 16))
    with pytest.raises(ShapeError):
        assemble_harmonic(3, 2, {(0,): (1, 0)}, AngularGrid.uniform(4, 16))


def test_membership_in_Xn():
    assert harmonic_in_Xn({(0,): (1, 0), (4,): (2, 0)}, 2)
    assert not harmonic_in_Xn({(3,): (1, 0)}, 2)
    assert not harmonic_in_Xn({(2,): (1, 0.5)}, 2)


def test_lb_residual_constant_is_exact():
    grid = AngularGrid.uniform(3, 16)
    Y = assemble_harmonic(3, 0, {(0,): (1.0, 0.0)}, grid)
    assert lb_residual(Y, 0, 3) < 1e-12


def test_lb_residual_planar_cosine():
    grid = AngularGrid.uniform(2, 256)
    Y = assemble_harmonic(2, 2, {2: (1.0, 0.0)}, grid)
    assert lb_residual(Y, 2, 2) < 1e-3


def test_lb_residual_spatial_refinement():
    coeffs = {(0,): (0.3, 0), (1,): (1.0, -0.5), (2,): (0.2, 0.7)}
    res = [lb_residual(assemble_harmonic(3, 2, coeffs, AngularGrid.uniform(3, n)), 2, 3) for n in (32, 64, 128)]
    assert res[-1] < 1e-2
    assert res[0] / res[1] > 3.0 and res[1] / res[2] > 3.0


def test_lb_residual_four_dimensional():
    coeffs = {(0, 1): (0.4, 0), (1, 2): (1.0, 0.3), (2, 2): (0.5, -0.2)}
    res = [lb_residual(assemble_harmonic(4, 2, coeffs, AngularGrid.uniform(4, n)), 2, 4) for n in (32, 64)]
    assert res[1] < res[0] and res[1] < 0.05


@pytest.mark.parametrize("N,j", [(2, 0), (2, 3), (2, 5), (3, 1), (3, 4), (3, 5), (4, 1), (4, 3), (4, 5)])
def test_assembled_harmonics_are_eigenfunctions(N, j):
    rng = np.random.default_rng(100 * N + j)
    if N == 2:
        keys = [(j,)]
    elif N == 3:
        keys = [(ell,) for ell in range(j + 1)]
    else:
        keys = [(ell, i1) for i1 in range(j + 1) for ell in range(i1 + 1)]
    coeffs = {k: tuple(rng.normal(size=2)) for k in keys}
    res = [lb_residual(assemble_harmonic(N, j, coeffs, AngularGrid.uniform(N, n)), j, N) for n in (32, 64)]
    if N == 2:
        # spectral in phi: exact up to rounding
        assert max(res) < 1e-10
    else:
        assert res[1] <= 0.35 * res[0]
        assert res[1] < 0.05


def test_lb_residual_needs_resolution():
    grid = AngularGrid.uniform(2, 4)
    Y = assemble_harmonic(2, 1, {1: (1, 0)}, grid)
    with pytest.raises(ConfigurationError):
        lb_residual(Y, 1, 2)
