import math

import numpy as np
import pytest

from laneemden.bifurcation import find_bifurcation
from laneemden.continuation import (
    BranchConfig,
    Discretization,
    Hyperplane,
    NonradialState,
    Termination,
    apply_T,
    branch_switch,
    cone_check,
    continue_branch,
    discrete_crossing,
    newton_correct,
    radial_state,
    regrid,
    residual,
    residual_norm,
)
from laneemden.continuation import _System, cone_margin
from laneemden.errors import ConfigurationError, DomainError, StepFailure
from laneemden.radial import Annulus, solve_radial

PLANAR = Annulus(1.0, 2.0, 2)


@pytest.fixture(scope="module")
def origin2():
    return find_bifurcation(PLANAR, 1, 2)


@pytest.fixture(scope="module")
def crossing2(origin2):
    disc = Discretization(PLANAR, 2, 256, 16)
    return disc, *discrete_crossing(disc, origin2.bracket, 1)


@pytest.fixture(scope="module")
def short_branch(origin2):
    return continue_branch(origin2, BranchConfig(p_max=1.6))


def test_discretization_contract():
    with pytest.raises(ConfigurationError):
        Discretization(Annulus(1.0, 2.0, 3), 1)
    with pytest.raises(ConfigurationError):
        Discretization(PLANAR, 1, L=4)
    with pytest.raises(DomainError):
        Discretization(PLANAR, 0)


def test_zero_state_zero_residual():
    disc = Discretization(PLANAR, 1, 64, 8)
    st = NonradialState(disc, 3.0, np.zeros((65, 9)), 1.0)
    assert np.all(residual(st) == 0.0)
    assert np.all(apply_T(np.zeros((65, 9)), 3.0, disc) == 0.0)


def test_embedded_radial_profile_residual():
    disc = Discretization(PLANAR, 3, 256, 8)
    prof = solve_radial(PLANAR, 3.0, 1, K=2048)
    scale = math.exp(math.log(prof.level) / 2.0)
    c = np.zeros((257, 9))
    c[:, 0] = prof.evaluate(disc.r) / scale
    st = NonradialState(disc, 3.0, c, prof.level)
    res = residual(st)
    assert np.max(np.abs(res[:, 1:])) < 1e-12 * prof.level * np.max(np.abs(c)) ** 3
    # radial equation in symmetric form, evaluated independently
    v, r, h = c[:, 0], disc.r, disc.h
    rp, rm = r[1:-1] + h / 2, r[1:-1] - h / 2
    ode = -(rp * (v[2:] - v[1:-1]) - rm * (v[1:-1] - v[:-2])) / (h * h * r[1:-1]) - prof.level * v[1:-1] ** 3
    # agreement up to the rounding of second differences, eps * |v| / h^2
    assert np.max(np.abs(res[1:-1, 0] - ode)) < 1e-12 * np.max(np.abs(v)) / h**2
    # second-order stencil on an exact solution: O(h^2) relative to the Laplacian scale
    assert np.max(np.abs(ode)) < 1e-3 * prof.level * np.max(np.abs(v)) ** 3


def test_radial_state_is_fixed_point():
    disc = Discretization(PLANAR, 1, 256, 8)
    st = radial_state(disc, 2.0)
    assert st.residual_norm < 1e-10
    assert np.all(st.v[:, 1:] == 0.0)
    assert cone_check(st)
    assert np.max(np.abs(st.v - apply_T(st))) < 1e-9 * np.max(np.abs(st.v))


def test_residual_independent_of_L(short_branch):
    st = short_branch.states[-1]
    disc = st.disc
    big = Discretization(PLANAR, disc.n, disc.K, 2 * disc.L)
    c = np.zeros((disc.K + 1, big.block))
    c[:, : disc.block] = st.v
    wide = NonradialState(big, st.p, c, st.level)
    assert abs(residual_norm(wide) - st.residual_norm) < 1e-8
    assert np.max(np.abs(residual(wide)[:, : disc.block] - residual(st))) < 1e-8 * np.max(np.abs(residual(st)) + 1)


def test_newton_from_converged_state_takes_no_steps():
    disc = Discretization(PLANAR, 1, 128, 8)
    st = radial_state(disc, 2.5)
    out = newton_correct(st)
    assert len(out.newton_log) == 1
    assert np.array_equal(out.v, st.v)


def test_newton_returns_to_radial_at_generic_p():
    disc = Discretization(PLANAR, 2, 256, 16)
    rad = radial_state(disc, 1.5)
    c = rad.v.copy()
    c[1:-1, 1] += 1e-3 * np.sin(np.pi * (disc.ri - 1.0)) * np.max(np.abs(c))
    c[1:-1, 2] -= 5e-4 * np.sin(2 * np.pi * (disc.ri - 1.0)) * np.max(np.abs(c))
    out = newton_correct(NonradialState(disc, 1.5, c, rad.level))
    assert out.p == 1.5
    assert out.residual_norm < 1e-10
    assert out.mode_amplitude < 1e-8


def test_newton_converges_quadratically():
    disc = Discretization(PLANAR, 2, 256, 16)
    rad = radial_state(disc, 1.5)
    c = rad.v.copy()
    c[1:-1, 0] *= 1.0 + 0.02 * np.sin(3 * np.pi * (disc.ri - 1.0))
    c[1:-1, 1] += 0.01 * np.sin(np.pi * (disc.ri - 1.0)) * np.max(np.abs(c))
    out = newton_correct(NonradialState(disc, 1.5, c, rad.level))
    res = out.newton_log
    assert res[-1] < 1e-10
    pairs = [(a, b) for a, b in zip(res, res[1:]) if a < 1e-3 and b > 1e-12]  # skip the rounding floor
    assert pairs
    assert all(b <= 50.0 * a * a for a, b in pairs)


def test_newton_rejects_far_guess():
    disc = Discretization(PLANAR, 1, 64, 8)
    rad = radial_state(disc, 2.0)
    with pytest.raises(StepFailure):
        newton_correct(NonradialState(disc, 2.0, 3.0 * rad.v, rad.level))


def test_branch_switch_eps_zero_is_radial(origin2, crossing2):
    disc, ph, rad, phi1 = crossing2
    st = branch_switch(origin2, 0.0, disc, radial=rad, phi1=phi1)
    assert st.p == rad.p
    assert np.array_equal(st.v, rad.v)


def test_branch_switch_negative_eps(origin2, crossing2):
    disc, _, rad, phi1 = crossing2
    with pytest.raises(DomainError):
        branch_switch(origin2, -1e-3, disc, radial=rad, phi1=phi1)


def test_discrete_crossing_near_continuous_root(origin2, crossing2):
    _, ph, _, phi1 = crossing2
    assert abs(ph - origin2.pn) < 1e-4
    assert np.all(phi1[1:-1] > 0)


def test_predictor_in_cone_and_corrects(origin2, crossing2):
    disc, _, rad, phi1 = crossing2
    for eps in (1e-3, 1e-2):
        pred = branch_switch(origin2, eps, disc, radial=rad, phi1=phi1)
        assert pred.in_cone and cone_check(pred)
        system = _System(disc, rad.v[:, 0])
        X0 = rad.pack()
        tangent = pred.pack() - X0
        tangent[-2:] = 0.0
        tangent /= math.sqrt(np.sum(system.W * tangent**2))
        offset = float(np.sum(system.W * tangent * (pred.pack() - X0)))
        out = newton_correct(pred, Hyperplane(tangent, X0, offset), reference=rad.v[:, 0])
        assert out.residual_norm < 1e-10
        assert out.mode_amplitude >= 0.5 * pred.mode_amplitude


def test_cone_check_counterexample(crossing2):
    disc, _, rad, phi1 = crossing2
    c = rad.v.copy()
    c[:, 2] += 0.3 * np.max(np.abs(c)) * np.sin(np.pi * (disc.r - 1.0))
    assert not cone_check(NonradialState(disc, rad.p, c, rad.level))


def _random_cone_element(disc, rng):
    r = disc.r
    bump = (r - 1.0) * (2.0 - r)
    theta = disc.theta[None, :]
    G = (rng.normal() * np.sin(np.pi * (r - 1.0) * rng.integers(1, 4)))[:, None] * np.ones_like(theta)
    for k in range(1, 5):
        alpha = rng.uniform(0, 2) * bump * (1.0 + rng.uniform(0, 1) * np.sin(np.pi * (r - 1.0)))
        G = G + alpha[:, None] * ((1.0 + np.cos(theta)) / 2.0) ** k
    return disc.project(G)


def test_apply_T_preserves_cone():
    rng = np.random.default_rng(2024)
    failures = 0
    for _ in range(100):
        n = int(rng.integers(1, 4))
        disc = Discretization(PLANAR, n, 128, 16)
        g = _random_cone_element(disc, rng)
        assert cone_margin(disc, g) <= 1e-12
        z = apply_T(g, float(rng.uniform(1.2, 6.0)), disc)
        failures += not cone_check(NonradialState(disc, 2.0, z, 1.0))
    assert failures == 0


def test_dphi_commutes_with_laplacian():
    disc = Discretization(PLANAR, 3, 64, 8)
    D = disc.dphi()
    lhs = (D @ disc.laplacian("cos")).toarray()
    rhs = (disc.laplacian("sin") @ D).toarray()
    assert np.array_equal(lhs, rhs)


def test_symmetry_closure_roundtrip():
    disc = Discretization(PLANAR, 2, 64, 8)
    rng = np.random.default_rng(5)
    c = rng.normal(size=(65, 9))
    c[0] = c[-1] = 0.0
    assert np.allclose(disc.project(disc.values(c)), c, atol=1e-13)
    z = apply_T(c, 3.0, disc)
    assert z.shape == c.shape and np.all(z[[0, -1]] == 0.0)


def test_short_branch_properties(short_branch):
    br = short_branch
    assert br.termination is Termination.P_MAX
    assert all(s.residual_norm < 1e-10 for s in br.states)
    assert all(s.in_cone for s in br.states)
    assert np.all(np.diff(br.arclength) > 0)
    assert br.amplitude_exponent() == pytest.approx(0.5, abs=0.1)
    assert br.nodal_zones[0] == 1 and not br.nodal_change
    ps = [s.p for s in br.states]
    assert all(b > a for a, b in zip(ps[1:], ps[2:]))


def test_regrid_in_L_is_exact(short_branch):
    st = short_branch.states[-1]
    new, drift = regrid(st, L=2 * st.disc.L)
    assert new.residual_norm < 1e-10 and drift < 1e-6


def test_grid_honesty_under_doubling(short_branch):
    for st in (short_branch.states[len(short_branch.states) // 2], short_branch.states[-1]):
        new, drift = regrid(st, K=2 * st.disc.K, L=2 * st.disc.L)
        assert new.residual_norm < 1e-10
        assert drift < 1e-6
