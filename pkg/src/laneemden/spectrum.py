"""Weighted Sturm-Liouville spectrum, Morse indices and the cone index.

For a radial solution ``u`` the radial problem

    -phi'' - (N-1)/r phi' - p|u|^{p-1} phi = nu / r^2 phi,   phi(a) = phi(b) = 0

is multiplied by ``r^{N-1}`` and discretised by second-order finite
differences in self-adjoint form, giving the symmetric tridiagonal pencil
``A phi = nu B phi`` with ``B = diag(r^{N-3})``. The eigenvalues of the
linearised operator weighted by ``1/|x|^2`` are ``nu_i + lambda_j`` with
multiplicity ``N_j``; everything in this module is built from that fact.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .errors import (
    AtDegeneracyError,
    ConfigurationError,
    NumericalError,
    ResolutionError,
)
from .harmonics import lb_eigenvalue, mult_full, mult_sym
from .radial import Annulus, RadialProfile, solve_radial

__all__ = [
    "Space",
    "SLSpectrum",
    "MorseReport",
    "MorseChange",
    "DegeneracyWarning",
    "sl_spectrum",
    "spectrum_at",
    "J_exponent",
    "morse_index",
    "morse_index_sym",
    "morse_report",
    "is_degenerate",
    "chi_signs",
    "morse_change",
    "cone_index",
    "degeneracy_tol",
]

DEFAULT_DEGENERACY_TOL = 1e-6


class DegeneracyWarning(UserWarning):
    """Emitted when a spectrum sits within tolerance of a degeneracy."""


class Space(str, Enum):
    FULL = "FULL"
    SYM = "SYM"
    BOTH = "BOTH"


def degeneracy_tol(lam: float, tol: float = DEFAULT_DEGENERACY_TOL) -> float:
    """Absolute tolerance ``tol * (1 + lambda_j)`` used for ``|nu_i + lambda_j|``."""
    return tol * (1.0 + lam)


@dataclass(frozen=True)
class SLSpectrum:
    """Lowest eigenpairs of the weighted radial problem.

    ``eigenfunctions[i]`` is sampled on ``grid`` (zero at both ends), scaled
    so that ``sum(h * r^{N-3} phi^2) = 1`` and ``phi'(a) > 0``.
    """

    profile: RadialProfile
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    grid: np.ndarray

    @property
    def p(self) -> float:
        return self.profile.p

    @property
    def m(self) -> int:
        return self.profile.m

    @property
    def dim(self) -> int:
        return self.profile.annulus.dim

    @property
    def n_negative(self) -> int:
        return int(np.count_nonzero(self.eigenvalues < 0))


def sl_spectrum(profile: RadialProfile, q: int | None = None, K: int | None = None) -> SLSpectrum:
    """The ``q`` smallest eigenpairs of the weighted radial problem.

    ``K`` overrides the number of grid intervals; the profile is then
    resampled by cubic Hermite interpolation. ``q`` defaults to ``m + 2``.
    """
    q = profile.m + 2 if q is None else int(q)
    if K is not None:
        profile_k = profile.resample(int(K))
    else:
        profile_k = profile
    r = profile_k.grid
    n_int = r.size - 2
    if q < 1 or q > n_int:
        raise ConfigurationError(f"cannot extract {q} eigenvalues from {n_int} interior nodes")
    N = profile.annulus.dim
    h = (r[-1] - r[0]) / (r.size - 1)
    ri = r[1:-1]
    pot = profile.p * np.abs(profile_k.values[1:-1]) ** (profile.p - 1.0)
    rp = (ri + 0.5 * h) ** (N - 1)
    rm = (ri - 0.5 * h) ** (N - 1)
    diag = (rp + rm) / h**2 - pot * ri ** (N - 1)
    off = -rp[:-1] / h**2
    wsqrt = ri ** (0.5 * (N - 3))
    try:
        vals, vecs = eigh_tridiagonal(
            diag / wsqrt**2, off / (wsqrt[:-1] * wsqrt[1:]), select="i", select_range=(0, q - 1)
        )
    except LinAlgError as exc:
        raise NumericalError(f"tridiagonal eigensolver failed at p={profile.p}", where=profile.p) from exc
    phi = vecs / wsqrt[:, None] / math.sqrt(h)
    phi *= np.where(phi[0] < 0, -1.0, 1.0)
    funcs = np.zeros((q, r.size))
    funcs[:, 1:-1] = phi.T
    return SLSpectrum(profile, vals, funcs, r)


@functools.lru_cache(maxsize=4096)
def spectrum_at(annulus: Annulus, p: float, m: int, K: int = 2048, q: int | None = None) -> SLSpectrum:
    """Memoised ``sl_spectrum(solve_radial(annulus, p, m, K), q)``."""
    return sl_spectrum(solve_radial(annulus, p, m, K), q)


def J_exponent(nu: float, N: int) -> float:
    """``(sqrt((N-2)^2 - 4 nu) - N + 2) / 2``; ``-inf`` when the root is imaginary.

    A mode ``j`` contributes to the Morse index exactly when ``j < J``.
    """
    disc = (N - 2) ** 2 - 4.0 * nu
    if disc < 0:
        return -math.inf
    return 0.5 * (math.sqrt(disc) - N + 2)


def _negative_part(spectrum):
    vals = spectrum.eigenvalues
    if vals[-1] < 0:
        raise ConfigurationError(
            f"all {vals.size} computed eigenvalues are negative; request more to capture the Morse index"
        )
    neg = vals[vals < 0]
    if neg.size != spectrum.m:
        warnings.warn(
            f"{neg.size} negative radial eigenvalues for m={spectrum.m} at p={spectrum.p}",
            DegeneracyWarning,
            stacklevel=3,
        )
    return neg


def _modes_below(J):
    # mode indices j >= 0 with j < J (strict)
    if J <= 0:
        return range(0)
    return range(int(math.ceil(J)))


def _warn_if_near_integer(J_values, tol, p):
    for J in J_values:
        if J > 0 and abs(J - round(J)) < tol:
            warnings.warn(f"J = {J!r} is within {tol:g} of an integer at p={p}", DegeneracyWarning,
                          stacklevel=3)


def morse_index(spectrum: SLSpectrum, N: int | None = None, tol: float = 1e-9) -> int:
    """Morse index ``sum_{i: nu_i<0} sum_{j < J_i} N_j``."""
    N = spectrum.dim if N is None else N
    Js = [J_exponent(nu, N) for nu in _negative_part(spectrum)]
    _warn_if_near_integer(Js, tol, spectrum.p)
    return sum(mult_full(j, N) for J in Js for j in _modes_below(J))


def morse_index_sym(spectrum: SLSpectrum, N: int | None = None, n: int = 1, tol: float = 1e-9) -> int:
    """Morse index restricted to functions even and 2*pi/n periodic in phi.

    Sums ``mult_sym(j, n, N)`` over ``j < J_i`` with ``j <= n``. The count is
    complete whenever ``nu_1 + lambda_{n+1} > 0``, which holds on both sides
    of a crossing of ``nu_1 + lambda_n`` and wherever ``nu_1 + lambda_n > 0``.
    """
    N = spectrum.dim if N is None else N
    Js = [J_exponent(nu, N) for nu in _negative_part(spectrum)]
    _warn_if_near_integer(Js, tol, spectrum.p)
    return sum(mult_sym(j, n, N) for J in Js for j in _modes_below(J) if j <= n)


def is_degenerate(spectrum: SLSpectrum, N: int | None = None,
                  tol: float = DEFAULT_DEGENERACY_TOL) -> list[tuple[int, int]]:
    """Pairs ``(i, j)`` (1-based ``i``) with ``|nu_i + lambda_j| < tol (1 + lambda_j)``.

    Only the admissible pairs are reported: ``i <= m`` with ``j >= 2``, or
    ``i = m`` with ``j = 1``. A radial eigenvalue within tolerance of zero is
    a warning, never a pair.
    """
    N = spectrum.dim if N is None else N
    m = spectrum.m
    pairs = []
    for i, nu in enumerate(spectrum.eigenvalues[:m], start=1):
        if abs(nu) < degeneracy_tol(0.0, tol):
            warnings.warn(f"nu_{i} = {nu!r} vanishes within tolerance at p={spectrum.p}: "
                          "radial nondegeneracy violated", DegeneracyWarning, stacklevel=2)
        j = 1
        while True:
            lam = lb_eigenvalue(j, N)
            if nu + lam > degeneracy_tol(lam, tol):
                break
            if abs(nu + lam) < degeneracy_tol(lam, tol) and (j >= 2 or i == m):
                pairs.append((i, j))
            j += 1
    return pairs


class MorseChange(NamedTuple):
    delta: int
    odd: bool


def chi_signs(spec_minus: SLSpectrum, spec_plus: SLSpectrum, n: int, N: int | None = None,
              tol: float = DEFAULT_DEGENERACY_TOL) -> list[int]:
    """Signs ``chi_0, ..., chi_n`` of the eigenvalue crossings between two spectra.

    ``chi_n`` is the sign of ``nu_1 + lambda_n`` on the lower side. For
    ``j < n``, ``chi_j`` is the lower-side sign of ``nu_i + lambda_j`` for the
    first ``i in {2, ..., m}`` whose value changes sign between the spectra,
    and 0 when none does.
    """
    N = spec_minus.dim if N is None else N
    m = spec_minus.m
    lo, hi = spec_minus.eigenvalues, spec_plus.eigenvalues

    def crossing(i, j):
        lam = lb_eigenvalue(j, N)
        g0, g1 = lo[i] + lam, hi[i] + lam
        eps = degeneracy_tol(lam, tol)
        if abs(g0) < eps and abs(g1) < eps:
            raise ResolutionError(
                f"nu_{i + 1} + lambda_{j} is within {eps:g} of zero at both ends; use a smaller offset"
            )
        return g0 * g1 < 0, int(np.sign(g0))

    crosses, sign_n = crossing(0, n)
    if not crosses:
        raise ResolutionError(f"nu_1 + lambda_{n} does not change sign between the two spectra")
    chi = [0] * (n + 1)
    chi[n] = sign_n
    for j in range(n):
        for i in range(1, m):
            crosses, s = crossing(i, j)
            if crosses:
                chi[j] = s
                break
    return chi


def morse_change(chi: Sequence[int], n: int, N: int, space: Space | str = Space.FULL) -> MorseChange:
    """``sum_j chi_j * N_j(W)`` for ``W`` the full space or the phi-symmetric subspace."""
    space = Space(space)
    if space is Space.FULL:
        mult = [mult_full(j, N) for j in range(n + 1)]
    elif space is Space.SYM:
        mult = [mult_sym(j, n, N) for j in range(n + 1)]
    else:
        raise ValueError("space must be FULL or SYM")
    delta = int(sum(c * k for c, k in zip(chi, mult)))
    return MorseChange(delta, delta % 2 == 1)


def cone_index(spectrum: SLSpectrum, n: int, N: int | None = None,
               tol: float = DEFAULT_DEGENERACY_TOL) -> int:
    """Fixed-point index of the radial solution in the cone of phi-decreasing functions.

    0 when ``nu_1 + lambda_n < 0``, otherwise the Leray-Schauder degree
    ``(-1)**m_sym`` in the symmetric subspace.
    """
    N = spectrum.dim if N is None else N
    lam = lb_eigenvalue(n, N)
    g = spectrum.eigenvalues[0] + lam
    if abs(g) < degeneracy_tol(lam, tol):
        raise AtDegeneracyError(f"nu_1 + lambda_{n} = {g:.3g} at p={spectrum.p}: index undefined",
                                where=spectrum.p)
    if g < 0:
        return 0
    return -1 if morse_index_sym(spectrum, N, n) % 2 else 1


@dataclass
class MorseReport:
    p: float
    morse_full: int
    morse_sym: dict = field(default_factory=dict)
    degeneracies: list = field(default_factory=list)
    J_values: list = field(default_factory=list)
    eigenvalues: list = field(default_factory=list)


def morse_report(spectrum: SLSpectrum, n_values: Sequence[int] = (), N: int | None = None,
                 tol: float = DEFAULT_DEGENERACY_TOL) -> MorseReport:
    N = spectrum.dim if N is None else N
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegeneracyWarning)
        full = morse_index(spectrum, N)
        sym = {int(n): morse_index_sym(spectrum, N, int(n)) for n in n_values}
        degs = is_degenerate(spectrum, N, tol)
    Js = [J_exponent(nu, N) for nu in spectrum.eigenvalues if nu < 0]
    return MorseReport(spectrum.p, full, sym, degs, Js, [float(v) for v in spectrum.eigenvalues])
