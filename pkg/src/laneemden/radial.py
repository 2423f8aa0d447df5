"""Radial nodal solutions of -Delta u = |u|^{p-1} u on an annulus.

The radial equation ``u'' + (N-1)/r u' + |u|^{p-1} u = 0`` with
``u(a) = u(b) = 0`` is solved by shooting from ``r = a``. Internally the
trajectory is integrated in the amplitude-normalised variable
``y = u / sigma**(1/(p-1))`` which solves

    y'' + (N-1)/r y' + sigma |y|^{p-1} y = 0,   y(a) = 0,  y'(a) = sqrt(sigma).

``sigma`` (called the *level*) is the size of the potential ``|u|^{p-1}`` and
sits near the m-th Dirichlet eigenvalue of the annulus for every p, so one
geometric search range serves all exponents; the shooting slope itself
spans dozens of decades between p close to 1 and p large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .errors import (
    ConvergenceError,
    DegenerateProfileError,
    DomainError,
    NumericalError,
    SearchFailure,
)

__all__ = [
    "Annulus",
    "RadialProfile",
    "Shot",
    "shoot",
    "solve_radial",
    "energy",
    "energy_terms",
    "nodal_zones",
    "sphere_area",
    "slope_to_level",
    "level_to_slope",
]

DEFAULT_K = 2048
DEFAULT_RTOL = 1e-12
DEFAULT_BOUNDARY_TOL = 1e-10
SWEEP_RTOL = 1e-8
# DOP853 refuses relative tolerances below 100 * machine epsilon
MIN_RTOL = 100 * np.finfo(float).eps


@dataclass(frozen=True)
class Annulus:
    """The annulus ``a < |x| < b`` in R^N."""

    a: float
    b: float
    dim: int = 2

    def __post_init__(self):
        if not (self.a > 0 and self.b > self.a):
            raise DomainError(f"annulus needs 0 < a < b, got a={self.a}, b={self.b}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise DomainError(f"dimension must be an integer >= 2, got {self.dim}")

    def scaled(self, s: float) -> "Annulus":
        return Annulus(self.a * s, self.b * s, self.dim)


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere S^{N-1}."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


def slope_to_level(slope: float, p: float) -> float:
    return math.exp(math.log(slope) * 2.0 * (p - 1.0) / (p + 1.0))


def level_to_slope(level: float, p: float) -> float:
    return math.exp(math.log(level) * (1.0 / (p - 1.0) + 0.5))


def _amplitude(level, p):
    try:
        return math.exp(math.log(level) / (p - 1.0))
    except OverflowError:
        raise NumericalError(
            f"solution amplitude overflows double precision at p={p}", where=p
        ) from None


class Shot(NamedTuple):
    """One shooting trajectory sampled on a uniform grid."""

    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    n_zeros: int
    endpoint: float
    zeros: np.ndarray


def _integrate(annulus, p, level, rtol, dense):
    a, b, N = annulus.a, annulus.b, annulus.dim
    c = float(N - 1)
    pm1 = p - 1.0
    rtol = max(rtol, MIN_RTOL)

    def rhs(r, Y):
        y, dy = Y
        return [dy, -c / r * dy - level * abs(y) ** pm1 * y]

    def crossing(r, Y):
        return Y[0]

    # trial steps at huge levels may overflow; the step control rejects them
    with np.errstate(over="ignore", invalid="ignore"):
        sol = solve_ivp(
            rhs,
            (a, b),
            [0.0, math.sqrt(level)],
            method="DOP853",
            rtol=rtol,
            atol=rtol * 1e-3,
            events=crossing,
            dense_output=dense,
        )
    if sol.status != 0:
        raise NumericalError(
            f"integrator failed at r={sol.t[-1]!r}: {sol.message}", where=float(sol.t[-1])
        )
    eps = 1e-9 * (b - a)
    zeros = np.array([t for t in sol.t_events[0] if a + eps < t < b - eps])
    return sol, zeros


def _shot_from_solution(annulus, p, level, sol, zeros, K):
    r = np.linspace(annulus.a, annulus.b, K + 1)
    Y = sol.sol(r)
    scale = _amplitude(level, p)
    u = scale * Y[0]
    du = scale * Y[1]
    u[0] = 0.0
    endpoint = scale * float(sol.y[0, -1])
    u[-1] = endpoint
    return Shot(r, u, du, int(zeros.size), endpoint, zeros)


def shoot(annulus: Annulus, p: float, slope: float, K: int = DEFAULT_K,
          rtol: float = DEFAULT_RTOL) -> Shot:
    """Integrate the radial equation from ``u(a)=0, u'(a)=slope`` to ``r=b``.

    Returns the trajectory sampled at ``K+1`` uniform radii, the number of
    zeros in the open interval (a, b) (located by event detection) and the
    endpoint value ``u(b)``.
    """
    if not p > 1.0:
        raise DomainError(f"exponent must exceed 1, got p={p}")
    if not slope > 0.0:
        raise DomainError(f"shooting slope must be positive, got {slope}")
    level = slope_to_level(slope, p)
    sol, zeros = _integrate(annulus, p, level, rtol, dense=True)
    return _shot_from_solution(annulus, p, level, sol, zeros, K)


@dataclass(frozen=True)
class RadialProfile:
    """The radial solution ``u_p^m`` sampled on a uniform radial grid."""

    annulus: Annulus
    p: float
    m: int
    slope: float
    grid: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    level: float
    rtol: float = DEFAULT_RTOL
    boundary_tol: float = DEFAULT_BOUNDARY_TOL
    zeros: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def K(self) -> int:
        return self.grid.size - 1

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def evaluate(self, r, derivative: bool = False):
        """Cubic Hermite interpolation of ``u`` (or ``u'``) at radii ``r``."""
        spline = CubicHermiteSpline(self.grid, self.values, self.derivs)
        return spline(r, 1) if derivative else spline(r)

    def resample(self, K: int) -> "RadialProfile":
        if K == self.K:
            return self
        r = np.linspace(self.annulus.a, self.annulus.b, K + 1)
        spline = CubicHermiteSpline(self.grid, self.values, self.derivs)
        u = spline(r)
        u[0], u[-1] = self.values[0], self.values[-1]
        return RadialProfile(self.annulus, self.p, self.m, self.slope, r, u, spline(r, 1),
                             self.level, self.rtol, self.boundary_tol, self.zeros)

    def negated(self) -> "RadialProfile":
        return RadialProfile(self.annulus, self.p, self.m, self.slope, self.grid, -self.values,
                             -self.derivs, self.level, self.rtol, self.boundary_tol, self.zeros)


def solve_radial(annulus: Annulus, p: float, m: int, K: int = DEFAULT_K, *,
                 rtol: float = DEFAULT_RTOL, boundary_tol: float = DEFAULT_BOUNDARY_TOL,
                 level0: float = 1e-3, max_doublings: int = 60, max_iter: int = 200,
                 sign: int = 1) -> RadialProfile:
    """Radial solution with exactly ``m`` nodal zones.

    The level is swept geometrically from ``level0`` (doubling at most
    ``max_doublings`` times) until the trajectory has ``m`` interior zeros.
    The bracket is bisected on the zero count until its ends carry ``m-1``
    and ``m`` zeros, then Brent's method, safeguarded by bisection, drives
    ``u(b)`` to zero. ``sign=-1`` returns the opposite solution, negative in
    the first zone.
    """
    if not p > 1.0:
        raise DomainError(f"exponent must exceed 1, got p={p}")
    if int(m) != m or m < 1:
        raise DomainError(f"number of nodal zones must be an integer >= 1, got {m}")
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")

    def count(level, tol):
        return _integrate(annulus, p, level, tol, dense=False)[1].size

    counts = []
    lo = hi = None
    level = level0
    for _ in range(max_doublings + 1):
        z = count(level, SWEEP_RTOL)
        counts.append(z)
        if z >= m:
            hi = level
            break
        lo = level
        level *= 2.0
    if hi is None or lo is None:
        raise SearchFailure(
            f"no level with {m} nodal zones in [{level0:g}, {level0 * 2.0 ** max_doublings:g}]",
            search_range=(level0, level0 * 2.0**max_doublings),
            last_counts=counts[-5:],
        )

    iters = 0
    z_lo, z_hi = counts[-2], counts[-1]
    tol = SWEEP_RTOL
    while True:
        if z_lo == m - 1 and z_hi == m:
            if tol == rtol:
                break
            # confirm the bracket at full accuracy before root finding
            tol = rtol
            z_lo, z_hi = count(lo, tol), count(hi, tol)
            iters += 2
            continue
        if iters >= max_iter:
            raise ConvergenceError(f"zero-count bisection did not isolate m={m} at p={p}", where=p)
        mid = 0.5 * (lo + hi)
        z = count(mid, tol)
        iters += 1
        if z >= m:
            hi, z_hi = mid, z
        else:
            lo, z_lo = mid, z
        if z_lo > m - 1 or z_hi < m:
            raise NumericalError(f"zero count not monotone in the level at p={p}", where=p)

    def endpoint(level):
        sol, _ = _integrate(annulus, p, level, rtol, dense=False)
        return float(sol.y[0, -1])

    budget = max(max_iter - iters, 1)
    try:
        level = brentq(endpoint, lo, hi, xtol=1e-15 * hi, rtol=8.9e-16, maxiter=budget)
    except (ValueError, RuntimeError) as exc:
        raise ConvergenceError(f"endpoint root not found at p={p}: {exc}", where=p) from exc

    sol, zeros = _integrate(annulus, p, level, rtol, dense=True)
    shot = _shot_from_solution(annulus, p, level, sol, zeros, K)
    sup = float(np.max(np.abs(shot.u)))
    if abs(shot.endpoint) > boundary_tol * sup:
        raise ConvergenceError(
            f"|u(b)|/max|u| = {abs(shot.endpoint) / sup:.3g} exceeds {boundary_tol:g} at p={p}",
            where=p,
        )
    if shot.n_zeros != m - 1:
        raise ConvergenceError(f"converged profile has {shot.n_zeros} interior zeros, "
                               f"expected {m - 1}", where=p)
    u, du = shot.u, shot.du
    if u[1] < 0:
        u, du = -u, -du
    if sign < 0:
        u, du = -u, -du
    return RadialProfile(annulus, float(p), int(m), level_to_slope(level, p), shot.r, u, du,
                         level, rtol, boundary_tol, zeros)


def energy_terms(profile: RadialProfile) -> tuple[float, float]:
    """Return ``(int |grad u|^2, int |u|^{p+1})`` over the annulus (trapezoid rule)."""
    N = profile.annulus.dim
    r = profile.grid
    w = sphere_area(N) * r ** (N - 1)
    grad = np.trapezoid(w * profile.derivs**2, r)
    power = np.trapezoid(w * np.abs(profile.values) ** (profile.p + 1.0), r)
    return float(grad), float(power)


def energy(profile: RadialProfile) -> float:
    """``F(u) = 1/2 int |grad u|^2 - 1/(p+1) int |u|^{p+1}``."""
    grad, power = energy_terms(profile)
    return 0.5 * grad - power / (profile.p + 1.0)


def nodal_zones(profile, tol: float = 1e-8) -> int:
    """Count maximal constant-sign zones of the sampled profile.

    Samples with ``|u| <= tol * max|u|`` are treated as zero, which hides
    sub-tolerance wiggles next to the boundary nodes. Accepts a
    :class:`RadialProfile` or a plain array of values.
    """
    values = np.asarray(getattr(profile, "values", profile), dtype=float)
    sup = np.max(np.abs(values)) if values.size else 0.0
    if sup == 0.0:
        raise DegenerateProfileError("profile vanishes identically")
    s = np.sign(values[np.abs(values) > tol * sup])
    return int(1 + np.count_nonzero(s[1:] != s[:-1]))
