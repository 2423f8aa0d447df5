"""Location of nonradial bifurcation points along the radial curve.

A point ``p_n`` is a zero of ``g(p) = nu_1(p) + lambda_n`` where ``g``
changes sign. At each located point the Morse index is compared on both
sides, in the full space and in the subspace of functions even and
``2*pi/n`` periodic in ``phi``, and the cone index is evaluated.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, InconsistencyError, LaneEmdenError, NotFoundError
from .harmonics import lb_eigenvalue, mult_full, mult_sym
from .radial import Annulus
from .spectrum import (
    DegeneracyWarning,
    Space,
    chi_signs,
    cone_index,
    morse_change,
    spectrum_at,
)

__all__ = [
    "BifurcationPoint",
    "SweepResult",
    "ParityReport",
    "default_p_range",
    "nu1_of_p",
    "find_bifurcation",
    "sweep",
    "parity_report",
    "Degeneracy",
    "degeneracy_scan",
]

N_SAMPLES = 64
DELTA_CAP = 0.05
ROOT_TOL = 1e-8


def default_p_range(N: int) -> tuple[float, float]:
    """Default search interval for ``p``; radial computations ignore criticality."""
    return (1.01, 40.0)


def _spectrum(annulus, m, p, K):
    return spectrum_at(annulus, float(p), int(m), int(K), int(m) + 2)


def nu1_of_p(annulus: Annulus, m: int, p: float, K: int = 2048) -> float:
    """First weighted radial eigenvalue along the curve of ``m``-zone solutions."""
    return float(_spectrum(annulus, m, p, K).eigenvalues[0])


def _nu_of_p(annulus, m, p, K, i):
    return float(_spectrum(annulus, m, p, K).eigenvalues[i])


@dataclass
class BifurcationPoint:
    """A located crossing ``nu_1(p_n) + lambda_n = 0`` with its side data."""

    annulus: Annulus
    m: int
    n: int
    pn: float
    bracket: tuple
    g_bracket: tuple
    residual: float
    delta: float
    chi: list
    change_full: int
    change_sym: int
    cone_jump: tuple
    certified_space: str | None
    K: int = 2048
    other_roots: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["annulus"] = {"a": self.annulus.a, "b": self.annulus.b, "N": self.annulus.dim}
        d["bracket"] = list(self.bracket)
        d["g_bracket"] = list(self.g_bracket)
        d["cone_jump"] = list(self.cone_jump)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BifurcationPoint":
        d = dict(d)
        ann = d.pop("annulus")
        d["annulus"] = Annulus(float(ann["a"]), float(ann["b"]), int(ann["N"]))
        for key in ("bracket", "g_bracket", "cone_jump"):
            d[key] = tuple(d[key])
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


def _sample_grid(p_range, samples):
    lo, hi = p_range
    if not 1.0 < lo < hi:
        raise ValueError(f"p range must satisfy 1 < p_lo < p_hi, got {p_range}")
    return 1.0 + np.geomspace(lo - 1.0, hi - 1.0, samples)


def _sample(annulus, m, K, grid):
    out = []
    for p in grid:
        try:
            out.append(nu1_of_p(annulus, m, float(p), K))
        except LaneEmdenError:
            out.append(math.nan)
    return np.array(out)


def _brackets(grid, g):
    found = []
    for k in range(grid.size - 1):
        if np.isfinite(g[k]) and np.isfinite(g[k + 1]) and g[k] * g[k + 1] < 0:
            found.append((float(grid[k]), float(grid[k + 1])))
    return found


def _root(f, lo, hi):
    return brentq(f, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200)


def _side_delta(annulus, m, n, K, pn, delta):
    """Shrink ``delta`` until no other crossing ``nu_i + lambda_j`` falls in ``(pn-delta, pn+delta)``
    except ones located at ``pn`` itself."""
    N = annulus.dim
    for _ in range(30):
        lo, hi = pn - delta, pn + delta
        s_lo = _spectrum(annulus, m, lo, K).eigenvalues
        s_hi = _spectrum(annulus, m, hi, K).eigenvalues
        nearest = math.inf
        for i in range(1, m):
            for j in range(n):
                lam = lb_eigenvalue(j, N)
                if (s_lo[i] + lam) * (s_hi[i] + lam) < 0:
                    pr = _root(lambda p: _nu_of_p(annulus, m, p, K, i) + lam, lo, hi)
                    dist = abs(pr - pn)
                    if dist > 1e-6 * (1.0 + pn):
                        nearest = min(nearest, dist)
        if not math.isfinite(nearest):
            return delta
        delta = 0.5 * nearest
    raise ConvergenceError(f"could not isolate the crossing at p={pn}")


def find_bifurcation(annulus: Annulus, m: int, n: int, p_range: Sequence[float] | None = None,
                     K: int = 2048, samples: int = N_SAMPLES) -> BifurcationPoint:
    """Locate the smallest ``p`` in ``p_range`` where ``nu_1(p) + lambda_n`` changes sign.

    ``g`` is pre-sampled on ``samples`` points geometric in ``p - 1``; the
    first sign change is refined by Brent's method. Further sign changes are
    recorded in ``other_roots`` as brackets.
    """
    N = annulus.dim
    lam = lb_eigenvalue(n, N)
    p_range = default_p_range(N) if p_range is None else tuple(p_range)
    grid = _sample_grid(p_range, samples)
    nu = _sample(annulus, m, K, grid)
    g = nu + lam
    found = _brackets(grid, g)
    if not found:
        raise NotFoundError(
            f"nu_1 + lambda_{n} keeps one sign on p in {p_range} (m={m}, N={N})",
            samples=list(zip(grid.tolist(), g.tolist())),
        )
    lo, hi = found[0]

    def gfun(p):
        return nu1_of_p(annulus, m, p, K) + lam

    pn = _root(gfun, lo, hi)
    res = gfun(pn)
    if abs(res) >= ROOT_TOL * (1.0 + lam):
        raise ConvergenceError(f"|nu_1 + lambda_{n}| = {abs(res):.3g} at p={pn}", where=pn)

    delta = min(DELTA_CAP, 0.5 * (hi - lo), 0.5 * (pn - 1.0))
    delta = _side_delta(annulus, m, n, K, pn, delta)
    spec_lo = _spectrum(annulus, m, pn - delta, K)
    spec_hi = _spectrum(annulus, m, pn + delta, K)
    chi = chi_signs(spec_lo, spec_hi, n, N)
    full = morse_change(chi, n, N, Space.FULL)
    sym = morse_change(chi, n, N, Space.SYM)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegeneracyWarning)
        jump = (cone_index(spec_lo, n, N), cone_index(spec_hi, n, N))
    if full.odd and sym.odd:
        space = Space.BOTH.value
    elif sym.odd:
        space = Space.SYM.value
    elif full.odd:
        space = Space.FULL.value
    else:
        space = None
    return BifurcationPoint(
        annulus, int(m), int(n), float(pn), (pn - delta, pn + delta),
        (float(spec_lo.eigenvalues[0] + lam), float(spec_hi.eigenvalues[0] + lam)),
        float(res), float(delta), chi, full.delta, sym.delta, jump, space, int(K),
        [list(b) for b in found[1:]],
    )


@dataclass
class SweepResult:
    points: list
    failures: dict
    increasing: bool
    n_bar: int | None


def _find_one(args):
    annulus, m, n, p_range, K = args
    try:
        return find_bifurcation(annulus, m, n, p_range, K)
    except LaneEmdenError as exc:
        return exc


def sweep(annulus: Annulus, m: int, n_range: Sequence[int], p_range: Sequence[float] | None = None,
          K: int = 2048, jobs: int = 1) -> SweepResult:
    """Run :func:`find_bifurcation` for every ``n`` in ``n_range``.

    Failures are collected per ``n`` rather than raised. ``n_bar`` is the
    smallest ``n`` with a crossing inside ``p_range``; ``increasing`` tells
    whether the located ``p_n`` grow with ``n``.
    """
    tasks = [(annulus, m, int(n), p_range, K) for n in n_range]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_find_one, tasks))
    else:
        results = [_find_one(t) for t in tasks]
    points, failures = [], {}
    for (_, _, n, _, _), res in zip(tasks, results):
        if isinstance(res, BifurcationPoint):
            points.append(res)
        else:
            failures[n] = f"{type(res).__name__}: {res}"
    pns = [pt.pn for pt in points]
    increasing = all(b > a for a, b in zip(pns, pns[1:]))
    n_bar = points[0].n if points else None
    return SweepResult(points, failures, increasing, n_bar)


@dataclass
class ParityReport:
    n: int
    m: int
    N: int
    pn: float
    chi: list
    secondary_full: int
    change_full: int
    change_sym: int
    certified_space: str

    def to_dict(self) -> dict:
        return asdict(self)

    def __str__(self):
        return (
            f"n={self.n} m={self.m} N={self.N} p_n={self.pn!r}: Morse change "
            f"{self.change_full:+d} in the full space, {self.change_sym:+d} in X^{self.n}; "
            f"odd change certified in {self.certified_space}"
        )


def parity_report(point: BifurcationPoint, N: int | None = None) -> ParityReport:
    """Decide in which space the Morse index changes by an odd amount.

    ``N = 2``: always the symmetric subspace. ``N = 3``: the full space when
    the secondary crossings contribute an even amount, else the symmetric
    subspace. ``N >= 4``: the secondary contribution has the same parity in
    both spaces and ``N_n``, ``N_n(X^n)`` have opposite parity, so exactly
    one total is odd; that space is selected.
    """
    N = point.annulus.dim if N is None else N
    n, chi = point.n, list(point.chi)
    secondary = sum(chi[j] * mult_full(j, N) for j in range(n))
    if N == 2:
        space, change = Space.SYM, point.change_sym
    elif N == 3:
        space = Space.FULL if secondary % 2 == 0 else Space.SYM
        change = point.change_full if space is Space.FULL else point.change_sym
    else:
        sym_secondary = sum(chi[j] * mult_sym(j, n, N) for j in range(n))
        if (secondary - sym_secondary) % 2:
            raise InconsistencyError("secondary Morse contributions differ in parity between spaces")
        space = Space.FULL if point.change_full % 2 else Space.SYM
        change = point.change_full if space is Space.FULL else point.change_sym
    if change % 2 == 0:
        raise InconsistencyError(
            f"Morse changes {point.change_full} (full) and {point.change_sym} (X^{n}) are both even "
            f"at p={point.pn}: crossings were mis-detected"
        )
    return ParityReport(n, point.m, N, point.pn, chi, int(secondary), point.change_full,
                        point.change_sym, space.value)


@dataclass
class Degeneracy:
    i: int
    j: int
    p: float
    multiplicity: int


def degeneracy_scan(annulus: Annulus, m: int, p_range: Sequence[float] | None = None,
                    jmax: int = 20, K: int = 2048, samples: int = N_SAMPLES) -> list[Degeneracy]:
    """All ``p`` in ``p_range`` where some ``nu_i + lambda_j`` (``i <= m``, ``j <= jmax``) vanishes.

    Sign changes on the geometric sample grid are refined by Brent's method;
    the result is sorted by ``p``.
    """
    N = annulus.dim
    p_range = default_p_range(N) if p_range is None else tuple(p_range)
    grid = _sample_grid(p_range, samples)
    nus = []
    for p in grid:
        try:
            nus.append(_spectrum(annulus, m, float(p), K).eigenvalues[:m])
        except LaneEmdenError:
            nus.append(np.full(m, math.nan))
    nus = np.array(nus)
    out = []
    for i in range(m):
        for j in range(jmax + 1):
            lam = lb_eigenvalue(j, N)
            for lo, hi in _brackets(grid, nus[:, i] + lam):
                pr = _root(lambda p: _nu_of_p(annulus, m, p, K, i) + lam, lo, hi)
                out.append(Degeneracy(i + 1, j, float(pr), mult_full(j, N)))
    out.sort(key=lambda d: (d.p, d.i, d.j))
    return out
