"""Continuation of nonradial solutions in the plane (N = 2).

Functions in ``X^n`` (even, ``2*pi/n``-periodic in ``phi``) are stored as
cosine series ``u(r, phi) = sum_l c_l(r) cos(n l phi)``, ``l = 0..L``, on a
uniform radial grid with Dirichlet rows at ``r = a, b``.

The unknown is written ``u = t**(1/(p-1)) * v`` with ``v`` normalised by a
fixed linear functional. Then ``-Lap v = t |v|^(p-1) v`` and every relative
quantity (residual, cone test, mode amplitude) is the same for ``u`` and
``v``. This keeps the numbers ``O(1)`` near ``p = 1`` where ``|u|`` is
astronomically large.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal, solve_banded
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .errors import ConfigurationError, DomainError, NumericalError, StepFailure
from .radial import Annulus, nodal_zones, solve_radial

__all__ = [
    "Termination",
    "Discretization",
    "NonradialState",
    "Branch",
    "BranchConfig",
    "Hyperplane",
    "radial_state",
    "residual",
    "residual_norm",
    "newton_correct",
    "apply_T",
    "cone_check",
    "discrete_crossing",
    "branch_switch",
    "continue_branch",
    "regrid",
]

MIN_MODES = 8

log = logging.getLogger(__name__)


class Termination(str, Enum):
    P_MAX = "P_MAX"
    NORM_MAX = "NORM_MAX"
    P_ONE = "P_ONE"
    RECONNECT = "RECONNECT"
    STEP_FAIL = "STEP_FAIL"


def _nonlin(U, p):
    return np.abs(U) ** (p - 1.0) * U


def _nonlin_du(U, p):
    return p * np.abs(U) ** (p - 1.0)


def _nonlin_dp(U, p):
    a = np.abs(U)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(a > 0, a ** (p - 1.0) * U * np.log(a), 0.0)
    return out


class Discretization:
    """Immutable operator context: grid, mode transforms, per-mode Laplacians."""

    def __init__(self, annulus: Annulus, n: int, K: int = 256, L: int = 16, oversample: int = 2):
        if annulus.dim != 2:
            raise ConfigurationError(f"continuation is implemented for N = 2 only, got N = {annulus.dim}")
        if n < 1:
            raise DomainError(f"symmetry order must be >= 1, got n={n}")
        if L < MIN_MODES:
            raise ConfigurationError(f"need at least {MIN_MODES} Fourier modes to control aliasing, got L={L}")
        if K < 16:
            raise ConfigurationError(f"need at least 16 radial intervals, got K={K}")
        self.annulus, self.n, self.K, self.L = annulus, int(n), int(K), int(L)
        a, b = annulus.a, annulus.b
        self.r = np.linspace(a, b, K + 1)
        self.h = (b - a) / K
        self.ri = self.r[1:-1]
        self.r_half = 0.5 * (self.r[:-1] + self.r[1:])
        self.freq = self.n * np.arange(L + 1)
        # collocation in theta = n*phi on [0, pi]; truncation to L modes dealiases
        self.M = oversample * L
        theta = np.pi * np.arange(self.M + 1) / self.M
        ell = np.arange(L + 1)
        self.theta = theta
        self.C = np.cos(np.outer(theta, ell))
        w = np.full(self.M + 1, 1.0)
        w[0] = w[-1] = 0.5
        P = (2.0 / self.M) * (w[None, :] * self.C.T)
        P[0] *= 0.5
        self.P = P
        self.block = L + 1
        self.size = (K - 1) * (L + 1)
        h2 = self.h * self.h
        self._off = -self.r_half[1:-1] / h2
        self._diag0 = (self.r_half[:-1] + self.r_half[1:]) / h2
        self.mode_weight = np.where(ell == 0, 1.0, 0.5)
        self._lap = None

    def mode_diag(self, ell):
        return self._diag0 + self.freq[ell] ** 2 / self.ri

    def mode_tridiag(self, ell):
        """Diagonal and off-diagonal of the symmetric form ``-(r c')' + (n l)^2 c / r``."""
        return self.mode_diag(ell), self._off

    def laplacian(self, parity: str = "cos"):
        """Sparse symmetric form of ``-r Lap`` on interior rows, node-major ordering.

        ``parity`` only labels the angular basis; cosine and sine modes of the
        same frequency share one radial block.
        """
        if parity not in ("cos", "sin"):
            raise ValueError(parity)
        nb = self.block
        main = (self._diag0[:, None] + self.freq[None, :] ** 2 / self.ri[:, None]).ravel()
        off = np.repeat(self._off, nb)
        return sp.diags([off, main, off], [-nb, 0, nb], format="csr")

    def dphi(self):
        """``d/dphi`` from cosine to sine coefficients on the same layout."""
        return sp.diags(np.tile(-self.freq.astype(float), self.K - 1), 0, format="csr")

    def values(self, c):
        """Collocation values on ``theta_j = pi j / M``; shape ``(K+1, M+1)``."""
        return c @ self.C.T

    def project(self, f):
        return f @ self.P.T

    def pack(self, c, tau, p):
        return np.concatenate([c[1:-1].ravel(), [tau, p]])

    def unpack(self, X):
        c = np.zeros((self.K + 1, self.block))
        c[1:-1] = X[:-2].reshape(self.K - 1, self.block)
        return c, float(X[-2]), float(X[-1])

    def metric_weights(self):
        w = np.tile(self.h * self.mode_weight, self.K - 1)
        return np.concatenate([w, [1.0, 1.0]])


@dataclass
class NonradialState:
    """A point ``(p, u)`` on the discrete problem, ``u = level**(1/(p-1)) * v``.

    ``v`` holds the cosine coefficients ``c[k, l]`` of the normalised
    function; ``coeffs`` gives those of ``u`` itself.
    """

    disc: Discretization = field(repr=False)
    p: float
    v: np.ndarray = field(repr=False)
    level: float
    residual_norm: float = math.nan
    mode_amplitude: float = 0.0
    in_cone: bool = True
    newton_log: list = field(default_factory=list, repr=False)

    @property
    def log_scale(self) -> float:
        return math.log(self.level) / (self.p - 1.0)

    @property
    def coeffs(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_scale) * self.v

    @property
    def log10_sup_norm(self) -> float:
        sup = float(np.max(np.abs(self.disc.values(self.v))))
        return (self.log_scale + math.log(sup)) / math.log(10.0) if sup > 0 else -math.inf

    @property
    def sup_norm(self) -> float:
        with np.errstate(over="ignore"):
            return float(10.0 ** self.log10_sup_norm) if self.log10_sup_norm < 308 else math.inf

    def pack(self):
        return self.disc.pack(self.v, math.log(self.level), self.p)

    def mean_profile(self) -> np.ndarray:
        """The ``phi``-average of ``v``, i.e. its ``l = 0`` row."""
        return self.v[:, 0].copy()


def _state(disc, X, log=None):
    c, tau, p = disc.unpack(X)
    st = NonradialState(disc, p, c, math.exp(tau), newton_log=list(log or []))
    st.residual_norm = residual_norm(st)
    st.mode_amplitude = _mode_amplitude(disc, c)
    st.in_cone = cone_check(st)
    return st


def _mode_amplitude(disc, c):
    sup = np.max(np.abs(disc.values(c)))
    return float(np.max(np.abs(c[:, 1])) / sup) if sup > 0 else 0.0


def _G(disc, c, level, p):
    """Symmetric-form residual ``-r Lap v - r t f(v)`` on interior rows."""
    F = disc.project(_nonlin(disc.values(c), p))
    out = disc._diag0[:, None] * c[1:-1] + disc.freq[None, :] ** 2 / disc.ri[:, None] * c[1:-1]
    out[1:] += disc._off[:, None] * c[1:-2]
    out[:-1] += disc._off[:, None] * c[2:-1]
    # boundary rows are zero, so no boundary terms
    return out - level * disc.ri[:, None] * F[1:-1]


def residual(state: NonradialState) -> np.ndarray:
    """Strong-form residual of ``-Lap v = t |v|^(p-1) v`` per radial node and mode.

    Radial second differences act per mode, the angular term is
    ``(n l / r)^2 c_l`` and the nonlinearity is evaluated at collocation
    points. Boundary rows are zero. Multiply by ``t**(1/(p-1))`` to get the
    residual of ``u``.
    """
    disc = state.disc
    out = np.zeros_like(state.v)
    out[1:-1] = _G(disc, state.v, state.level, state.p) / disc.ri[:, None]
    return out


def _poisson(disc, rhs):
    """Solve ``-r Lap z = rhs`` per mode with zero boundary rows."""
    z = np.zeros((disc.K + 1, disc.block))
    ab = np.zeros((3, disc.K - 1))
    ab[0, 1:] = disc._off
    ab[2, :-1] = disc._off
    for ell in range(disc.block):
        ab[1] = disc.mode_diag(ell)
        z[1:-1, ell] = solve_banded((1, 1), ab, rhs[:, ell])
    return z


def apply_T(g, p: float | None = None, disc: Discretization | None = None,
            level: float = 1.0) -> np.ndarray:
    """``z = level * (-Lap)^(-1)(|g|^(p-1) g)`` for cosine coefficients ``g``.

    ``g`` may be a coefficient matrix (then ``p`` and ``disc`` are required)
    or a state, in which case its normalised coefficients, level and ``p``
    are used.
    """
    if isinstance(g, NonradialState):
        disc, level, c = g.disc, g.level, g.v
        p = g.p if p is None else p
    else:
        if p is None:
            raise ConfigurationError("apply_T on a coefficient matrix needs the exponent p")
        c = np.asarray(g, dtype=float)
        if disc is None:
            raise ConfigurationError("apply_T on a coefficient matrix needs a discretization")
    if c.shape != (disc.K + 1, disc.block):
        raise ConfigurationError(f"coefficients of shape {c.shape}, expected {(disc.K + 1, disc.block)}")
    F = disc.project(_nonlin(disc.values(c), p))
    return _poisson(disc, level * disc.ri[:, None] * F[1:-1])


def residual_norm(state: NonradialState) -> float:
    """``|u - T(p, u)|_inf / |u|_inf`` on the collocation grid."""
    disc = state.disc
    v = state.v
    sup = np.max(np.abs(disc.values(v)))
    if sup == 0:
        return 0.0
    d = v - apply_T(v, state.p, disc, state.level)
    return float(np.max(np.abs(disc.values(d))) / sup)


def cone_check(state: NonradialState, n: int | None = None, tol: float = 1e-8) -> bool:
    """True iff ``d/dphi u <= tol * |u|_inf`` on a grid of ``(a, b) x (0, pi/n)``."""
    disc = state.disc
    c = state.v if isinstance(state, NonradialState) else np.asarray(state)
    return _cone_margin(disc, c) <= tol


def _cone_margin(disc, c):
    nodes = 4 * disc.block
    theta = np.pi * np.arange(1, nodes) / nodes
    S = np.sin(np.outer(theta, np.arange(disc.block)))
    dphi = (c[1:-1] * (-disc.freq)[None, :]) @ S.T
    sup = np.max(np.abs(disc.values(c)))
    if sup == 0:
        return 0.0
    return float(np.max(dphi) / sup)


def cone_margin(disc: Discretization, c: np.ndarray) -> float:
    """Largest value of ``d/dphi u / |u|_inf`` over the cone test grid."""
    return _cone_margin(disc, np.asarray(c, dtype=float))


@dataclass(frozen=True)
class Hyperplane:
    """Linear constraint ``<normal, W (X - point)> = offset`` in the packed unknowns."""

    normal: np.ndarray
    point: np.ndarray
    offset: float = 0.0


class _System:
    """Newton system: equations, normalisation, one extra linear constraint."""

    def __init__(self, disc, ref):
        self.disc = disc
        self.ref = ref
        w = np.zeros(disc.size + 2)
        ref_rows = np.zeros((disc.K - 1, disc.block))
        ref_rows[:, 0] = disc.h * disc.ri * ref[1:-1]
        w[:-2] = ref_rows.ravel()
        self.norm_row = w
        self.norm_value = float(np.dot(disc.h * disc.ri, ref[1:-1] ** 2))
        self.lap = disc.laplacian()
        self.W = disc.metric_weights()

    def equations(self, X, plane):
        disc = self.disc
        c, tau, p = disc.unpack(X)
        G = _G(disc, c, math.exp(tau), p).ravel()
        extra = [
            float(self.norm_row @ X) - self.norm_value,
            float(plane.normal @ (self.W * (X - plane.point))) - plane.offset,
        ]
        return np.concatenate([G, extra])

    def jacobian(self, X, plane):
        disc = self.disc
        c, tau, p = disc.unpack(X)
        t = math.exp(tau)
        U = disc.values(c)[1:-1]
        dU = _nonlin_du(U, p)
        blocks = np.matmul(disc.P[None, :, :] * dU[:, None, :], disc.C)
        blocks *= -(t * disc.ri)[:, None, None]
        nb = disc.block
        nk = disc.K - 1
        J = self.lap + sp.bsr_matrix((blocks, np.arange(nk), np.arange(nk + 1)), shape=(nk * nb, nk * nb))
        F = disc.project(_nonlin(U, p))
        Fp = disc.project(_nonlin_dp(U, p))
        col_tau = (-t * disc.ri[:, None] * F).ravel()
        col_p = (-t * disc.ri[:, None] * Fp).ravel()
        rows = sp.vstack([sp.csr_matrix(self.norm_row), sp.csr_matrix(plane.normal * self.W)])
        top = sp.hstack([J, sp.csr_matrix(np.column_stack([col_tau, col_p]))])
        return sp.vstack([top, rows]).tocsc()


def _fixed_p_plane(disc, X):
    normal = np.zeros_like(X)
    normal[-1] = 1.0
    return Hyperplane(normal, X.copy(), 0.0)


def _newton(system, X, plane, tol, max_iter, basin):
    disc = system.disc
    st = _state(disc, X)
    log = [st.residual_norm]
    if not math.isfinite(st.residual_norm) or st.residual_norm > basin:
        raise StepFailure(f"initial residual {st.residual_norm:.3g} outside the Newton basin {basin:g}",
                          last_residual=st.residual_norm)
    Eq = system.equations(X, plane)
    cons = max(abs(Eq[-2]), abs(Eq[-1]))
    for _ in range(max_iter):
        if st.residual_norm < tol and cons < 1e-9 * (1.0 + abs(system.norm_value)):
            st.newton_log = log
            return st
        try:
            # node-major ordering is already block tridiagonal; keep it
            dX = splu(system.jacobian(X, plane), permc_spec="NATURAL").solve(-Eq)
        except RuntimeError as exc:
            raise StepFailure(f"singular Newton matrix: {exc}", last_residual=log[-1]) from exc
        lam = 1.0
        while True:
            Xn = X + lam * dX
            if Xn[-1] > 1.0:
                stn = _state(disc, Xn)
                if math.isfinite(stn.residual_norm) and (stn.residual_norm < log[-1] or lam < 1.0 / 16):
                    break
            lam *= 0.5
            if lam < 1.0 / 64:
                raise StepFailure("damped Newton step made no progress", last_residual=log[-1])
        X, st = Xn, stn
        log.append(st.residual_norm)
        Eq = system.equations(X, plane)
        cons = max(abs(Eq[-2]), abs(Eq[-1]))
    raise StepFailure(f"Newton did not converge in {max_iter} iterations", last_residual=log[-1])


def newton_correct(state: NonradialState, constraint: str | Hyperplane = "fixed_p", *,
                   reference: np.ndarray | None = None, tol: float = 1e-10, max_iter: int = 50,
                   basin: float = 1e-1) -> NonradialState:
    """Damped Newton on the discrete problem until ``residual_norm < tol``.

    ``constraint`` is ``"fixed_p"`` or a :class:`Hyperplane` (arclength or
    amplitude constraint) in the packed unknowns ``(c, log t, p)``. The
    normalisation of ``v`` is its weighted inner product with ``reference``
    (by default the state's own mean profile). The residual history is kept
    in ``newton_log``.
    """
    disc = state.disc
    ref = state.v[:, 0] if reference is None else np.asarray(reference, dtype=float)
    system = _System(disc, ref)
    X = state.pack()
    plane = _fixed_p_plane(disc, X) if constraint == "fixed_p" else constraint
    if not isinstance(plane, Hyperplane):
        raise ConfigurationError(f"unknown constraint {constraint!r}")
    return _newton(system, X, plane, tol, max_iter, basin)


def radial_state(disc: Discretization, p: float, guess: NonradialState | None = None,
                 m: int = 1, tol: float = 1e-12) -> NonradialState:
    """The discrete radial solution with ``m`` nodal zones at ``p`` (only ``l = 0`` nonzero)."""
    if guess is None:
        prof = solve_radial(disc.annulus, p, m, K=2048)
        scale = math.exp(math.log(prof.level) / (p - 1.0))
        c = np.zeros((disc.K + 1, disc.block))
        c[:, 0] = prof.evaluate(disc.r) / scale
        c[0, 0] = c[-1, 0] = 0.0
        guess = NonradialState(disc, float(p), c, float(prof.level))
    else:
        c = np.zeros_like(guess.v)
        c[:, 0] = guess.v[:, 0]
        guess = NonradialState(disc, float(p), c, guess.level)
    # Newton in the l = 0 row only: tridiagonal bordered by the level column
    ref = guess.v[:, 0].copy()
    wr = disc.h * disc.ri * ref[1:-1]
    target = float(wr @ ref[1:-1])
    v = guess.v[1:-1, 0].copy()
    tau = math.log(guess.level)
    diag, off = disc.mode_tridiag(0)
    T = sp.diags([off, diag, off], [-1, 0, 1], format="csr")
    for _ in range(60):
        t = math.exp(tau)
        f = _nonlin(v, p)
        G = T @ v - t * disc.ri * f
        eq = np.concatenate([G, [wr @ v - target]])
        J = T - sp.diags(t * disc.ri * _nonlin_du(v, p))
        A = sp.bmat([[J, sp.csr_matrix((-t * disc.ri * f)[:, None])], [sp.csr_matrix(wr[None, :]), None]])
        d = splu(A.tocsc()).solve(-eq)
        v += d[:-1]
        tau += d[-1]
        # the strong form carries O(eps / h^2) rounding, so test the update instead
        if np.max(np.abs(d[:-1])) <= tol * np.max(np.abs(v)) and abs(d[-1]) <= tol:
            break
    else:
        raise StepFailure(f"discrete radial solve did not converge at p={p}")
    c = np.zeros((disc.K + 1, disc.block))
    c[1:-1, 0] = v
    return _state(disc, np.concatenate([c[1:-1].ravel(), [tau, p]]))


def _mode_block_min(disc, state, ell=1):
    U = state.v[1:-1, 0]
    diag, off = disc.mode_tridiag(ell)
    d = diag - state.level * disc.ri * _nonlin_du(U, state.p)
    w, vec = eigh_tridiagonal(d, off, select="i", select_range=(0, 0))
    return float(w[0]), vec[:, 0]


def discrete_crossing(disc: Discretization, bracket: Sequence[float], m: int = 1):
    """Locate ``p`` where the ``l = 1`` block of the linearisation at the discrete radial
    state becomes singular, inside ``bracket``.

    Returns ``(p_h, radial_state, phi1)`` with ``phi1 > 0`` normalised in the
    discrete ``L^2(r dr)`` norm.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    cache = {}

    def g(p):
        st = radial_state(disc, p, m=m)
        cache[p] = st
        return _mode_block_min(disc, st)[0]

    glo, ghi = g(lo), g(hi)
    if glo * ghi > 0:
        raise NumericalError(f"no sign change of the l=1 block on [{lo}, {hi}] at K={disc.K}")
    ph = brentq(g, lo, hi, xtol=1e-14, rtol=8.9e-16)
    st = cache.get(ph) or radial_state(disc, ph, m=m)
    _, phi = _mode_block_min(disc, st)
    phi = phi / math.sqrt(disc.h * np.sum(disc.ri * phi ** 2))
    if phi[np.argmax(np.abs(phi))] < 0:
        phi = -phi
    full = np.zeros(disc.K + 1)
    full[1:-1] = phi
    return float(ph), st, full


def branch_switch(origin, eps: float, disc: Discretization | None = None, *, radial=None, phi1=None,
                  K: int = 256, L: int = 16) -> NonradialState:
    """Predictor ``u_{p_n} + eps * phi_1(r) cos(n phi)`` in normalised coordinates.

    ``p`` is shifted by ``chi_n * eps**2`` towards the side where the radial
    solution has gained the crossing direction.
    """
    if not eps >= 0:
        raise DomainError(f"amplitude must be nonnegative, got eps={eps}")
    if disc is None:
        disc = Discretization(origin.annulus, origin.n, K, L)
    if radial is None or phi1 is None:
        _, radial, phi1 = discrete_crossing(disc, origin.bracket, origin.m)
    c = radial.v.copy()
    c[:, 1] += eps * phi1
    sign = origin.chi[origin.n] if origin.chi[origin.n] != 0 else 1
    st = NonradialState(disc, radial.p + sign * eps * eps, c, radial.level)
    st.residual_norm = residual_norm(st)
    st.mode_amplitude = _mode_amplitude(disc, c)
    st.in_cone = cone_check(st)
    return st


@dataclass
class BranchConfig:
    K: int = 256
    L: int = 16
    ds0: float = 1e-3
    ds_min: float = 1e-4
    ds_max: float = 1e-1
    p_max: float = 40.0
    norm_max: float = 1e30
    p_min: float = 1.0 + 1e-3
    reconnect_amplitude: float = 1e-9
    max_steps: int = 2000
    newton_tol: float = 1e-10
    basin: float = 1e-1
    cone_tol: float = 1e-8
    tail_tol: float = 1e-10
    L_max: int = 128


@dataclass
class Branch:
    n: int
    origin: object
    states: list
    termination: Termination
    reason: str = ""
    arclength: list = field(default_factory=list)
    p_h: float = math.nan
    energies: list = field(default_factory=list)
    nodal_zones: list = field(default_factory=list)
    nodal_change: bool = False
    refinements: list = field(default_factory=list)

    def amplitude_exponent(self, count: int = 10) -> float:
        """Slope of ``log A`` against ``log |p - p_h|`` over the first ``count`` states."""
        pts = [(abs(s.p - self.p_h), s.mode_amplitude) for s in self.states[1:count + 1]]
        x = np.log([q for q, _ in pts])
        y = np.log([A for _, A in pts])
        return float(np.polyfit(x, y, 1)[0])


def _energy(disc, st):
    """``F(u) = 1/2 int |grad u|^2 - 1/(p+1) int |u|^(p+1)`` over the annulus."""
    c, p = st.v, st.p
    h = disc.h
    dc = np.diff(c, axis=0) / h
    wphi = 2.0 * np.pi * disc.mode_weight
    grad = np.sum(wphi * np.sum(disc.r_half[:, None] * dc ** 2, axis=0) * h)
    ang = np.sum(wphi * disc.freq ** 2 * np.sum((c[1:-1] ** 2) / disc.ri[:, None], axis=0) * h)
    U = np.abs(disc.values(c)) ** (p + 1.0)
    wt = np.full(disc.M + 1, 1.0)
    wt[0] = wt[-1] = 0.5
    pot = 2.0 * (np.pi / disc.M) * np.sum((U[1:-1] @ wt) * disc.ri) * h
    ls = st.log_scale
    with np.errstate(over="ignore"):
        return float(0.5 * math.exp(min(2.0 * ls, 700.0)) * (grad + ang)
                     - math.exp(min((p + 1.0) * ls, 700.0)) * pot / (p + 1.0))


def _metric_dist(W, X, Y):
    d = X - Y
    return float(math.sqrt(np.sum(W * d * d)))


def continue_branch(origin, config: BranchConfig | None = None) -> Branch:
    """Follow the branch leaving the radial curve at ``origin`` inside ``X^n``.

    Pseudo-arclength with secant predictor and a Newton corrector on the
    hyperplane orthogonal to the tangent. The first step is taken along
    ``phi_1(r) cos(n phi)``. Steps adapt in ``[ds_min, ds_max]``.
    """
    cfg = config or BranchConfig()
    disc = Discretization(origin.annulus, origin.n, cfg.K, cfg.L)
    ph, rad, phi1 = discrete_crossing(disc, origin.bracket, origin.m)
    ref = rad.v[:, 0].copy()
    system = _System(disc, ref)
    W = system.W
    X0 = rad.pack()
    tangent = np.zeros_like(X0)
    tangent[:-2] = np.column_stack([np.zeros((disc.K - 1, 1)), phi1[1:-1, None],
                                    np.zeros((disc.K - 1, disc.block - 2))]).ravel()
    tangent /= math.sqrt(np.sum(W * tangent ** 2))

    states = [rad]
    arclen = [0.0]
    energies = [_energy(disc, rad)]
    zones = [_zones(rad)]
    X = X0
    ds = cfg.ds0
    refinements = []
    termination, reason = None, ""
    for _ in range(cfg.max_steps):
        pred = X + ds * tangent
        plane = Hyperplane(tangent, X.copy(), ds)
        try:
            st = _newton(system, pred, plane, cfg.newton_tol, 50, cfg.basin)
        except StepFailure as exc:
            ds *= 0.5
            if ds < cfg.ds_min:
                termination, reason = Termination.STEP_FAIL, f"step below {cfg.ds_min:g}: {exc}"
                break
            continue
        Xn = st.pack()
        st.in_cone = cone_check(st, tol=cfg.cone_tol)
        step = _metric_dist(W, Xn, X)
        tangent = (Xn - X) / step
        X = Xn
        states.append(st)
        arclen.append(arclen[-1] + step)
        energies.append(_energy(disc, st))
        zones.append(_zones(st))
        iters = len(st.newton_log) - 1
        if iters <= 3:
            ds = min(cfg.ds_max, ds * 1.5)
        elif iters > 6:
            ds = max(cfg.ds_min, ds * 0.7)
        if _tail(st) > cfg.tail_tol and disc.L < cfg.L_max:
            # the angular profile sharpens with p; add modes before the tail reaches the cone test
            disc = Discretization(disc.annulus, disc.n, disc.K, min(2 * disc.L, cfg.L_max))
            system = _System(disc, ref)
            W = system.W
            X_prev = _pad(disc, X - step * tangent)
            st = _newton(system, _pad(disc, X), _fixed_p_plane(disc, _pad(disc, X)),
                         cfg.newton_tol, 50, cfg.basin)
            st.in_cone = cone_check(st, tol=cfg.cone_tol)
            X = st.pack()
            tangent = (X - X_prev) / _metric_dist(W, X, X_prev)
            states[-1] = st
            refinements.append((len(states) - 1, disc.L))
        log.info("state %d: p=%.6g L=%d amp=%.4g res=%.2g newton=%d ds=%.3g cone=%s",
                 len(states) - 1, st.p, disc.L, st.mode_amplitude, st.residual_norm, iters, ds, st.in_cone)
        if _tail(st) > cfg.tail_tol:
            termination = Termination.STEP_FAIL
            reason = f"angular resolution limit: tail {_tail(st):.2g} at L={disc.L} (p = {st.p:.6g})"
        elif st.p > cfg.p_max:
            termination, reason = Termination.P_MAX, f"p = {st.p:.6g} > {cfg.p_max:g}"
        elif st.log10_sup_norm > math.log10(cfg.norm_max):
            termination, reason = Termination.NORM_MAX, f"|u|_inf = 1e{st.log10_sup_norm:.4g}"
        elif st.p < cfg.p_min:
            termination, reason = Termination.P_ONE, f"p = {st.p:.6g} with |u|_inf = 1e{st.log10_sup_norm:.4g}"
        elif st.mode_amplitude < cfg.reconnect_amplitude:
            termination, reason = Termination.RECONNECT, f"radial again at p = {st.p:.12g}"
        if termination is not None:
            break
    else:
        termination, reason = Termination.STEP_FAIL, f"budget exhausted after {cfg.max_steps} steps"
    return Branch(origin.n, origin, states, termination, reason, arclen, ph, energies, zones,
                  len(set(zones)) > 1, refinements)


def _tail(st):
    c = np.abs(st.v)
    return float(np.max(c[:, -2:]) / np.max(c))


def _pad(disc, X):
    """Embed packed unknowns from a coarser mode count into ``disc``."""
    rows = X[:-2].reshape(disc.K - 1, -1)
    out = np.zeros((disc.K - 1, disc.block))
    out[:, :rows.shape[1]] = rows
    return np.concatenate([out.ravel(), X[-2:]])


def _zones(st):
    try:
        return nodal_zones(st.v[:, 0])
    except Exception:
        return 0


def regrid(state: NonradialState, K: int | None = None, L: int | None = None, m: int = 1,
           tol: float = 1e-10) -> tuple[NonradialState, float]:
    """Re-solve a state on a finer grid at fixed ``p``.

    Returns the re-converged state and the coefficient drift measured on the
    common radial nodes and modes, relative to ``|v|_inf``.
    """
    d0 = state.disc
    K = K or d0.K
    L = L or d0.L
    if K % d0.K:
        raise ConfigurationError("refined K must be a multiple of the current K")
    disc = Discretization(d0.annulus, d0.n, K, L)
    c = np.zeros((K + 1, L + 1))
    r_old = d0.r
    for ell in range(min(L, d0.L) + 1):
        c[:, ell] = np.interp(disc.r, r_old, state.v[:, ell])
    guess = NonradialState(disc, state.p, c, state.level)
    new = newton_correct(guess, "fixed_p", reference=np.interp(disc.r, r_old, state.v[:, 0]), tol=tol)
    stride = K // d0.K
    common = min(L, d0.L) + 1
    drift = np.max(np.abs(new.v[::stride, :common] - state.v[:, :common]))
    return new, float(drift / np.max(np.abs(state.v)))
