"""Spherical-harmonic combinatorics and evaluation on S^{N-1}.

Conventions
-----------
Points of the sphere are written with the azimuth ``phi`` in [0, 2*pi) and the
polar angles ``theta_1, ..., theta_{N-2}`` in (0, pi), where ``theta_{N-2}`` is
the outermost angle (``x_N = cos(theta_{N-2})``) and ``theta_1`` the innermost.
The Laplace-Beltrami eigenvalue of degree ``j`` is ``j*(N-2+j)``.

All multiplicities are exact Python integers. Parity decisions downstream
depend on them, so no floating point enters this part of the module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, ShapeError

__all__ = [
    "HarmonicMode",
    "AngularGrid",
    "AngularField",
    "lb_eigenvalue",
    "mult_full",
    "mult_full_factorial",
    "mult_full_binomial",
    "mult_sym",
    "gegenbauer",
    "assemble_harmonic",
    "harmonic_in_Xn",
    "lb_residual",
]


def _check_dim(N):
    if not isinstance(N, (int, np.integer)) or N < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {N!r}")


def _check_mode(j):
    if not isinstance(j, (int, np.integer)) or j < 0:
        raise DomainError(f"mode index must be an integer >= 0, got {j!r}")


def _comb(n, k):
    # binomial with C(n, k) = 0 outside 0 <= k <= n
    if k < 0 or n < 0 or k > n:
        return 0
    return math.comb(n, k)


def lb_eigenvalue(j: int, N: int) -> int:
    """Eigenvalue ``j*(N-2+j)`` of the Laplace-Beltrami operator on S^{N-1}."""
    _check_mode(j)
    _check_dim(N)
    return int(j) * (int(N) - 2 + int(j))


def mult_full_factorial(j: int, N: int) -> int | None:
    """Multiplicity from ``(N+2j-2)(N+j-3)! / ((N-2)! j!)``.

    Returns None where the factorial form is undefined (``N=2, j=0``).
    """
    _check_mode(j)
    _check_dim(N)
    if N + j - 3 < 0:
        return None
    num = (N + 2 * j - 2) * math.factorial(N + j - 3)
    den = math.factorial(N - 2) * math.factorial(j)
    q, rem = divmod(num, den)
    if rem:
        raise ArithmeticError(f"non-integer multiplicity for j={j}, N={N}")
    return q


def mult_full_binomial(j: int, N: int) -> int:
    """Multiplicity from ``C(N+j-1, N-1) - C(N+j-3, N-1)``."""
    _check_mode(j)
    _check_dim(N)
    return _comb(N + j - 1, N - 1) - _comb(N + j - 3, N - 1)


def mult_full(j: int, N: int) -> int:
    """Dimension of the degree-``j`` eigenspace of the Laplace-Beltrami operator."""
    fact = mult_full_factorial(j, N)
    return mult_full_binomial(j, N) if fact is None else fact


def mult_sym(j: int, n: int, N: int) -> int:
    """Number of degree-``j`` harmonics that are even and 2*pi/n periodic in phi.

    Only ``0 <= j <= n`` is supported. For ``N = 2`` the count is 1 at
    ``j in {0, n}`` and 0 otherwise. For ``N >= 3`` the phi-independent
    harmonics contribute ``C(N+j-3, N-3)`` and, at ``j = n``, the single
    harmonic carrying ``cos(n*phi)`` adds one more.
    """
    _check_mode(j)
    _check_dim(N)
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DomainError(f"symmetry order must be an integer >= 1, got {n!r}")
    if j > n:
        raise DomainError(f"mult_sym is only defined for j <= n (j={j}, n={n})")
    if j == 0:
        return 1
    if N == 2:
        return 1 if j == n else 0
    base = _comb(N + j - 3, N - 3)
    return base + 1 if j == n else base


@dataclass(frozen=True)
class HarmonicMode:
    """Eigenvalue and multiplicities of one Laplace-Beltrami mode."""

    dim: int
    j: int
    lam: int
    mult_full: int
    mult_sym: Mapping[int, int] = field(default_factory=dict)

    @classmethod
    def build(cls, N: int, j: int, n_values: Sequence[int] = ()) -> "HarmonicMode":
        sym = {int(n): mult_sym(j, int(n), N) for n in n_values if n >= j}
        return cls(N, j, lb_eigenvalue(j, N), mult_full(j, N), sym)


# -- Gegenbauer polynomials --------------------------------------------------


def _gegenbauer_c(m, beta, omega):
    # C_m^{(beta)} by the three-term recurrence of (1 - 2 x w + x^2)^{-beta}
    c_prev = np.ones_like(omega)
    if m == 0:
        return c_prev
    c = 2.0 * beta * omega
    for d in range(2, m + 1):
        c_prev, c = c, (2.0 * (d + beta - 1.0) * omega * c - (d + 2.0 * beta - 2.0) * c_prev) / d
    return c


def gegenbauer(i: int, ell: int, k: float, omega):
    """Evaluate ``G_i^ell(omega, k)``.

    ``G_i^0(., k)`` is the coefficient of ``x**i`` in
    ``(1 - 2*x*omega + x**2) ** (-(1 + k) / 2)`` and
    ``G_i^ell = (1 - omega**2) ** (ell/2) * d^ell/domega^ell G_i^0``.
    The derivative is taken analytically through
    ``d/dw C_m^(b) = 2 b C_{m-1}^(b+1)``, so the result stays accurate near
    ``omega = +-1``. With ``k = 0`` this is the associated Legendre function
    without the Condon-Shortley phase.

    Accepts a scalar or an array for ``omega``.
    """
    if not isinstance(i, (int, np.integer)) or i < 0:
        raise DomainError(f"degree must be an integer >= 0, got {i!r}")
    if not isinstance(ell, (int, np.integer)) or not 0 <= ell <= i:
        raise DomainError(f"order must satisfy 0 <= ell <= i, got ell={ell!r}, i={i}")
    if k < 0:
        raise DomainError(f"family parameter must be >= 0, got {k!r}")
    w = np.asarray(omega, dtype=float)
    if np.any(np.abs(w) > 1.0):
        raise DomainError("omega must lie in [-1, 1]")
    alpha = 0.5 * (1.0 + k)
    scale = 1.0
    for t in range(ell):
        scale *= 2.0 * (alpha + t)
    out = scale * _gegenbauer_c(i - ell, alpha + ell, w)
    if ell:
        out = out * (1.0 - w * w) ** (0.5 * ell)
    return out if out.ndim else float(out)


# -- sampled harmonics --------------------------------------------------------


@dataclass(frozen=True)
class AngularGrid:
    """Uniform tensor grid on S^{N-1} in (phi, theta_1, ..., theta_{N-2}).

    ``phi`` is periodic on [0, 2*pi). Each ``theta_k`` grid is uniform on
    (0, pi) and stops one spacing short of the poles.
    """

    phi: np.ndarray
    thetas: tuple = ()

    @classmethod
    def uniform(cls, N: int, n_phi: int, n_theta: int | None = None) -> "AngularGrid":
        _check_dim(N)
        n_theta = n_phi if n_theta is None else n_theta
        phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
        th = np.linspace(0.0, np.pi, n_theta + 2)[1:-1]
        return cls(phi, tuple(th.copy() for _ in range(N - 2)))

    @property
    def dim(self) -> int:
        return len(self.thetas) + 2

    @property
    def shape(self) -> tuple:
        return (self.phi.size,) + tuple(t.size for t in self.thetas)

    def mesh(self) -> list:
        return np.meshgrid(self.phi, *self.thetas, indexing="ij")


@dataclass(frozen=True)
class AngularField:
    """Values of a function on an :class:`AngularGrid`."""

    values: np.ndarray
    grid: AngularGrid
    coeffs: Mapping | None = None


def _normalize_coeffs(N, j, coeffs):
    table = {}
    for key, ab in dict(coeffs).items():
        idx = (int(key),) if isinstance(key, (int, np.integer)) else tuple(int(x) for x in key)
        if N == 2:
            if idx != (j,):
                raise ShapeError(f"for N=2 the only admissible key is ({j},), got {idx}")
        elif len(idx) != N - 2:
            raise ShapeError(f"keys for N={N} must have {N - 2} entries, got {idx}")
        chain = idx + (j,) if N > 2 else idx
        if chain[0] < 0 or any(x > y for x, y in zip(chain, chain[1:])):
            raise ShapeError(f"key {idx} is not a chain ell <= i_1 <= ... <= {j}")
        ab = tuple(ab) if np.ndim(ab) else (ab, 0.0)
        if len(ab) != 2:
            raise ShapeError(f"coefficient for {idx} must be an (A, B) pair")
        table[idx] = (float(ab[0]), float(ab[1]))
    return table


def harmonic_in_Xn(coeffs: Mapping, n: int) -> bool:
    """True when every sine coefficient vanishes and every cosine order is a multiple of n."""
    for key, ab in dict(coeffs).items():
        ell = int(key) if isinstance(key, (int, np.integer)) else int(tuple(key)[0])
        a, b = (tuple(ab) if np.ndim(ab) else (ab, 0.0))
        if ell > 0 and b != 0.0:
            return False
        if a != 0.0 and ell % n:
            return False
    return True


def assemble_harmonic(N: int, j: int, coeffs: Mapping, grid: AngularGrid) -> AngularField:
    """Sample a degree-``j`` spherical harmonic on ``grid``.

    ``coeffs`` maps an index to an ``(A, B)`` pair. The index is ``(ell,)``
    (or a bare int) for ``N <= 3`` and ``(ell, i_1, ..., i_{N-3})`` with
    ``ell <= i_1 <= ... <= i_{N-3} <= j`` for ``N >= 4``. For ``N = 2`` the
    only index is ``j`` itself. The term for an index is

        prod_k G_{i_k}^{i_{k-1}}(cos theta_k, k-1) * (A cos(ell phi) + B sin(ell phi))

    with ``i_0 = ell`` and ``i_{N-2} = j``.
    """
    _check_dim(N)
    _check_mode(j)
    if grid.dim != N:
        raise ShapeError(f"grid is for N={grid.dim}, harmonic requested for N={N}")
    table = _normalize_coeffs(N, j, coeffs)
    mesh = grid.mesh()
    phi = mesh[0]
    values = np.zeros(grid.shape)
    for idx, (a, b) in table.items():
        ell = idx[0]
        term = a * np.cos(ell * phi) + b * np.sin(ell * phi)
        chain = idx + (j,)
        for k in range(1, N - 1):
            term = term * gegenbauer(chain[k], chain[k - 1], k - 1, np.cos(mesh[k]))
        values += term
    return AngularField(values, grid, table)


def lb_residual(Y: AngularField, j: int, N: int) -> float:
    """Relative L2 norm (surface measure) of ``Delta_S Y + lambda_j Y`` on the grid interior.

    The Laplace-Beltrami operator
    ``c_0 d2/dphi2 + sum_k c_k d/dtheta_k (sin^k theta_k d/dtheta_k)`` is
    discretised spectrally in phi and with centred differences in theta, the
    theta terms in the expanded form ``d2/dtheta2 + k cot(theta) d/dtheta``.
    Theta boundary rows are dropped, so the measure is taken away from the
    poles. Exact in phi; close to second order overall (the weighted norm
    hides the bounded corner error where two polar rows meet).
    """
    grid = Y.grid
    if grid.dim != N:
        raise ShapeError(f"field lives on S^{grid.dim - 1}, not S^{N - 1}")
    if min(grid.shape) < 8:
        raise ConfigurationError("need at least 8 grid points per angular dimension")
    y = np.asarray(Y.values, dtype=float)
    hphi = grid.phi[1] - grid.phi[0]
    mesh = grid.mesh()
    sin_th = [np.sin(t) for t in mesh[1:]]

    # phi is periodic: spectral second derivative, so no stencil error gets amplified by 1/sin^2
    nphi = y.shape[0]
    wav = np.fft.rfftfreq(nphi, d=hphi / (2.0 * np.pi))
    lap = np.fft.irfft(-(wav**2).reshape((-1,) + (1,) * (N - 2)) * np.fft.rfft(y, axis=0), n=nphi, axis=0)
    for s in sin_th:
        lap = lap / s**2

    inner = (slice(None),) + (slice(1, -1),) * (N - 2)
    lap = lap[inner]
    for k in range(1, N - 1):
        th = grid.thetas[k - 1]
        h = th[1] - th[0]
        shape = [1] * (N - 1)
        shape[k] = th.size - 2
        yc = y[inner]
        up = np.take(y, range(2, th.size), axis=k)[_other_inner(N, k)]
        dn = np.take(y, range(0, th.size - 2), axis=k)[_other_inner(N, k)]
        # (sin^k)^{-1} d(sin^k dY) = Y'' + k cot(theta) Y'; bounded error at the poles
        cot = (1.0 / np.tan(th[1:-1])).reshape(shape)
        term = (up - 2.0 * yc + dn) / h**2 + k * cot * (up - dn) / (2.0 * h)
        coef = np.ones(shape)
        for h_ax in range(k + 1, N - 1):
            sh = [1] * (N - 1)
            sh[h_ax] = grid.thetas[h_ax - 1].size - 2
            coef = coef / np.sin(grid.thetas[h_ax - 1][1:-1]).reshape(sh) ** 2
        lap = lap + coef * term

    yin = y[inner]
    # surface measure prod_k sin^k(theta_k); damps the O(1) stencil error in the polar corners
    weight = np.ones(yin.shape)
    for k in range(1, N - 1):
        shape = [1] * (N - 1)
        shape[k] = grid.thetas[k - 1].size - 2
        weight = weight * np.sin(grid.thetas[k - 1][1:-1]).reshape(shape) ** k
    scale = np.sum(weight * yin**2)
    if scale == 0.0:
        return 0.0
    r = lap + lb_eigenvalue(j, N) * yin
    return float(np.sqrt(np.sum(weight * r**2) / scale))


def _other_inner(N, ax):
    # interior slice on every theta axis except ``ax`` (already trimmed by take)
    return tuple(slice(None) if d == 0 or d == ax else slice(1, -1) for d in range(N - 1))
