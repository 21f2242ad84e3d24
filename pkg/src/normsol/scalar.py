"""Scalar normalized problem ``-Delta u - lambda u = f(u)``, ``int u^2 = a^2``.

Three routes to solutions:

* :func:`canonical_soliton` shoots the radial ODE for the positive decaying
  solution of ``-Delta Q + Q = Q^{p-1}``; :func:`ground_state_by_scaling`
  rescales it to any mass in the cubic three-dimensional case.
* :func:`minimize_on_M` runs preconditioned descent on the Pohozaev set at
  fixed mass, the computational form of "ground state = minimiser on M".
* :func:`excited_state_by_nodes` finds radial solutions with ``k`` sign
  changes by nested shooting (amplitude inside, frequency outside) and then
  polishes them with :func:`newton_scalar` on a grid.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq
from scipy.special import kv

from ._linalg import bordered_solve, dual_norm, tangent_projection, tridiag_to_banded
from .errors import (BracketFailure, Diverged, MaxIterations, NodeTargetUnreachable,
                     NonConvergence, SingularJacobian)
from .functionals import (Nonlinearity, project_to_M, scalar_constraint_G, scalar_energy_I,
                          scalar_gradient)
from .grid import RadialField, RadialGrid, sphere_area

BLOWUP = 1e6


@dataclass(frozen=True, eq=False)
class ScalarSolution:
    u: RadialField
    lam: float
    a: float
    energy: float
    pohozaev_residual: float
    node_count: int
    el_residual: float
    nonlinearity: Nonlinearity
    method: str = ""
    history: tuple = field(default=(), repr=False)

    @property
    def grid(self) -> RadialGrid:
        return self.u.grid

    @property
    def mass_error(self) -> float:
        return abs(self.u.mass / self.a**2 - 1)

    def summary(self) -> dict:
        return dict(lam=self.lam, a=self.a, energy=self.energy,
                    pohozaev_residual=self.pohozaev_residual, node_count=self.node_count,
                    el_residual=self.el_residual, mass_error=self.mass_error,
                    method=self.method)


def el_residual(u: RadialField, lam: float, nl: Nonlinearity) -> float:
    """Relative dual norm of ``-Delta u - lam u - f(u)``.

    Both the residual and ``lam u`` are measured in the norm dual to
    ``int |grad v|^2 + |lam| v^2``. Unlike a strong nodal norm this is not
    swamped by rounding at the tiny cells of a graded grid.
    """
    g = u.grid
    v = u.values
    res = g.stiffness_matvec(v) - g.weights * (lam * v + nl.f(v))
    sigma = max(abs(lam), 1e-300)
    scale = dual_norm(g, sigma * g.weights * v, sigma)
    return dual_norm(g, res, sigma) / max(scale, 1e-300)


def pohozaev_ratio(u: RadialField, nl: Nonlinearity) -> float:
    return abs(scalar_constraint_G(u, nl)) / u.grad_norm_sq


def make_solution(u, lam, a, nl, method="", history=()) -> ScalarSolution:
    return ScalarSolution(u=u, lam=float(lam), a=float(a), energy=scalar_energy_I(u, nl),
                          pohozaev_residual=pohozaev_ratio(u, nl), node_count=u.node_count(),
                          el_residual=el_residual(u, lam, nl), nonlinearity=nl,
                          method=method, history=tuple(history))


# ----------------------------------------------------------------------------
# radial shooting
# ----------------------------------------------------------------------------


@dataclass
class _Shot:
    amplitude: float
    zeros: int
    r_stop: float
    sol: object
    exponents: tuple


def _rhs_factory(nl: Nonlinearity, lam: float, exponents):
    n = nl.dimension
    omega = sphere_area(n)

    def rhs(r, y):
        u, du = y[0], y[1]
        d2 = -(n - 1) / r * du - lam * u - nl.f(u)
        wr = omega * r ** (n - 1)
        out = [du, d2, wr * u * u, wr * du * du]
        out.extend(wr * abs(u) ** p for p in exponents)
        return out

    return rhs


def _start(b, nl, lam, r0, exponents):
    n = nl.dimension
    g = (-lam * b - float(nl.f(b))) / n
    u = b + 0.5 * g * r0**2
    du = g * r0
    omega = sphere_area(n)
    vol = omega * r0**n / n
    y = [u, du, vol * b * b, omega * g * g * r0 ** (n + 2) / (n + 2)]
    y.extend(vol * abs(b) ** p for p in exponents)
    return y


def _shoot(b, nl, lam, r_end, exponents=(), rtol=1e-12):
    """Integrate from amplitude ``b`` until the first local minimum of ``|u|``.

    The trajectory is integrated one sign-definite segment at a time, so the
    minimum event ``sign(u) u' = 0`` (upward) and the zero event have fixed
    directions. The number of zeros crossed before stopping classifies the
    amplitude.
    """
    kappa = np.sqrt(-lam)
    r0 = 1e-6 / max(kappa, abs(b) ** 0.5, 1.0)
    rhs = _rhs_factory(nl, lam, exponents)
    y0 = _start(b, nl, lam, r0, exponents)
    cap = BLOWUP * max(abs(b), 1.0)

    def blow(r, y):
        return abs(y[0]) - cap

    blow.terminal = True

    zeros = 0
    sign = 1.0 if b > 0 else -1.0
    r = r0
    pieces = []
    atol = 1e-14 * max(abs(b), 1.0)
    while True:
        def zero(r, y):
            return y[0]

        def minimum(r, y, sign=sign):
            return sign * y[1]

        zero.terminal = True
        zero.direction = -sign
        minimum.terminal = True
        minimum.direction = 1
        s = solve_ivp(rhs, (r, r_end), y0, method="DOP853", rtol=rtol, atol=atol,
                      events=(zero, minimum, blow), dense_output=True)
        pieces.append(s)
        if s.status != 1 or len(s.t_events[0]) == 0:
            break
        zeros += 1
        sign = -sign
        y0 = s.y[:, -1]
        r = s.t[-1]
    return _Shot(b, zeros, pieces[-1].t[-1], _Piecewise(pieces), tuple(exponents))


class _Piecewise:
    """Dense output stitched across restarts of the integrator."""

    def __init__(self, pieces):
        self.pieces = pieces
        self.starts = np.array([p.t[0] for p in pieces])
        self.t_end = pieces[-1].t[-1]

    def __call__(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        idx = np.clip(np.searchsorted(self.starts, r, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty((self.pieces[0].y.shape[0], r.size))
        for i in np.unique(idx):
            m = idx == i
            out[:, m] = self.pieces[i].sol(r[m])
        return out


def _equilibrium(nl, lam):
    """Positive root of ``f(u)/u = -lam``, the constant solution."""
    kappa2 = -lam

    def g(u):
        return float(nl.f(u)) / u - kappa2

    hi = 1.0
    while g(hi) < 0:
        hi *= 2
    return brentq(g, 1e-12, hi, xtol=1e-15)


def _bracket_nodes(nl, lam, k, r_end, exponents, amp_range=None):
    """Amplitudes ``lo < hi`` with ``lo`` giving k zeros and ``hi`` giving more."""
    ustar = _equilibrium(nl, lam)
    if amp_range is None:
        lo_b, hi_b = ustar * (1 + 1e-3), ustar * 1e4
    else:
        lo_b, hi_b = amp_range
    n_lo = _shoot(lo_b, nl, lam, r_end, exponents).zeros
    if n_lo > k:
        raise NodeTargetUnreachable(f"amplitude {lo_b:.3g} already gives {n_lo} > {k} zeros")
    b = lo_b
    prev = lo_b
    while True:
        b = b * 1.25
        if b > hi_b:
            raise NodeTargetUnreachable(
                f"no amplitude in [{lo_b:.3g}, {hi_b:.3g}] gives more than {k} zeros")
        n = _shoot(b, nl, lam, r_end, exponents).zeros
        if n > k:
            return prev, b
        prev = b


def _bisect_amplitude(nl, lam, k, lo, hi, r_end, tol, exponents):
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _shoot(mid, nl, lam, r_end, exponents).zeros > k:
            hi = mid
        else:
            lo = mid
    return lo, hi


@dataclass(frozen=True, eq=False)
class ShotProfile:
    """A decaying radial solution at fixed ``lam`` reconstructed from shooting.

    ``profile(r)`` evaluates the bracketed trajectory up to ``r_cut`` and the
    linearised tail ``A r^{-nu} K_nu(kappa r)`` beyond it.
    """

    nonlinearity: Nonlinearity
    lam: float
    amplitude: float
    zeros: int
    r_cut: float
    tail_coeff: float
    mass: float
    kinetic: float
    power_integrals: dict
    zero_radii: tuple
    _dense: object = field(repr=False)

    @property
    def kappa(self) -> float:
        return float(np.sqrt(-self.lam))

    def profile(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        inner = r < self.r_cut
        if np.any(inner):
            out[inner] = self._dense(np.maximum(r[inner], self._dense.starts[0]))[0]
        outer = ~inner
        if np.any(outer):
            out[outer] = self._tail(r[outer])
        return out

    def _tail(self, r):
        nu = self.nonlinearity.dimension / 2 - 1
        return self.tail_coeff * r ** (-nu) * kv(nu, self.kappa * r)

    def _tail_deriv(self, r):
        nu = self.nonlinearity.dimension / 2 - 1
        return -self.kappa * self.tail_coeff * r ** (-nu) * kv(nu + 1, self.kappa * r)


def shoot_profile(nl: Nonlinearity, lam: float, k: int = 0, tol: float = 1e-13,
                  amp_range=None) -> ShotProfile:
    """Radial solution with ``k`` zeros decaying at infinity, for fixed ``lam < 0``.

    The amplitude ``u(0)`` is bisected between trajectories with ``k`` zeros
    and with more than ``k`` zeros (both stop at a local minimum of ``|u|``).
    The two bracketing trajectories agree up to the radius where roundoff in
    the amplitude is amplified; beyond it the linear decaying tail is used.
    """
    if not lam < 0:
        raise ValueError("lam must be negative")
    kappa = np.sqrt(-lam)
    exps = tuple(sorted({p for _, p in nl.terms} | {4.0}))
    r_end = (60.0 + 12.0 * k) / kappa
    lo, hi = _bracket_nodes(nl, lam, k, r_end, exps, amp_range)
    lo, hi = _bisect_amplitude(nl, lam, k, lo, hi, r_end, tol, exps)
    s_lo = _shoot(lo, nl, lam, r_end, exps)
    s_hi = _shoot(hi, nl, lam, r_end, exps)
    if s_lo.zeros != k:
        raise NodeTargetUnreachable(f"bracket lower end has {s_lo.zeros} zeros, wanted {k}")

    r_hi_end = min(s_lo.r_stop, s_hi.r_stop)
    rr = np.linspace(s_lo.sol.starts[0], r_hi_end, 20001)
    y_lo = s_lo.sol(rr)
    u_lo = y_lo[0]
    u_hi = s_hi.sol(rr)[0]
    # zeros of the lower trajectory
    sgn = np.sign(u_lo)
    zidx = np.nonzero(sgn[1:] * sgn[:-1] < 0)[0]
    zero_radii = []
    for i in zidx:
        zero_radii.append(brentq(lambda x: s_lo.sol(x)[0, 0], rr[i], rr[i + 1]))
    start = 0
    if len(zidx):
        start = zidx[-1] + 1
    # past the last extremum, the decaying branch
    seg = np.abs(u_lo[start:])
    start += int(np.argmax(seg))
    gap = np.abs(u_hi - u_lo)
    bad = np.nonzero(gap[start:] > 1e-3 * np.abs(u_lo[start:]))[0]
    if len(bad) == 0:
        i_cut = len(rr) - 1
    else:
        i_cut = start + int(bad[0])
    # step back a little so the cut sits well inside the agreement zone
    r_cut = float(rr[max(i_cut - 1, start)])
    y_cut = s_lo.sol(r_cut)[:, 0]
    u_c = y_cut[0]

    nu = nl.dimension / 2 - 1
    coeff = u_c / (r_cut ** (-nu) * kv(nu, kappa * r_cut))
    omega = sphere_area(nl.dimension)

    def tail_int(fn):
        val, _ = quad(fn, r_cut, np.inf, limit=200, epsabs=0, epsrel=1e-12)
        return val

    def t(r):
        return coeff * r ** (-nu) * kv(nu, kappa * r)

    def dt(r):
        return -kappa * coeff * r ** (-nu) * kv(nu + 1, kappa * r)

    w = lambda r: omega * r ** (nl.dimension - 1)  # noqa: E731
    mass = y_cut[2] + tail_int(lambda r: w(r) * t(r) ** 2)
    kinetic = y_cut[3] + tail_int(lambda r: w(r) * dt(r) ** 2)
    pints = {}
    for i, p in enumerate(exps):
        pints[p] = y_cut[4 + i] + tail_int(lambda r, p=p: w(r) * abs(t(r)) ** p)
    return ShotProfile(nl, float(lam), float(lo), k, r_cut, float(coeff), float(mass),
                       float(kinetic), pints, tuple(zero_radii), s_lo.sol)


@dataclass(frozen=True, eq=False)
class CanonicalSoliton:
    """Positive decaying solution of ``-Delta Q + Q = Q^{p-1}`` in R^N."""

    dimension: int
    exponent: float
    amplitude: float
    mass: float
    quartic: float
    kinetic: float
    shot: ShotProfile = field(repr=False)

    def profile(self, r):
        return self.shot.profile(r)

    def field(self, grid: RadialGrid) -> RadialField:
        vals = self.profile(grid.nodes)
        vals[-1] = 0.0
        return RadialField(grid, vals)

    @property
    def power_integral(self) -> float:
        return self.shot.power_integrals[self.exponent]


@lru_cache(maxsize=8)
def _soliton(dimension, exponent, tol):
    nl = Nonlinearity(((1.0, exponent),), dimension)
    amp = (2.0, 10.0) if exponent == 4.0 and dimension == 3 else None
    sh = shoot_profile(nl, -1.0, 0, tol=tol, amp_range=amp)
    return CanonicalSoliton(dimension, float(exponent), sh.amplitude, sh.mass,
                            sh.power_integrals[4.0], sh.kinetic, sh)


def canonical_soliton(dimension: int = 3, tol: float = 1e-13, exponent: float = 4.0,
                      grid: RadialGrid | None = None):
    """Shoot for ``Q`` and return ``(Q_field, mass_Q, q4)``.

    ``Q_field`` is sampled on ``grid`` (default ``[0, 30]`` with 6001 nodes).
    The full record, including the profile callable, is available from
    :func:`soliton_record`.
    """
    rec = soliton_record(dimension, tol, exponent)
    if grid is None:
        grid = RadialGrid.uniform(dimension, 30.0, 6001)
    return rec.field(grid), rec.mass, rec.quartic


def soliton_record(dimension: int = 3, tol: float = 1e-13, exponent: float = 4.0):
    try:
        return _soliton(int(dimension), float(exponent), float(tol))
    except NodeTargetUnreachable as exc:
        raise BracketFailure(str(exc)) from exc


# ----------------------------------------------------------------------------
# cubic scaling oracle
# ----------------------------------------------------------------------------


def scaling_constants(a: float, mu: float) -> dict:
    """``c``, ``lambda`` and the level ``ell`` of the cubic ground state in R^3."""
    q = soliton_record(3)
    c = q.mass / (mu * a * a)
    return dict(c=c, lam=-c * c, level=c * q.quartic / (8 * mu), amplitude=c / np.sqrt(mu) * q.amplitude)


def ground_state_level(a: float, mu: float) -> float:
    """``ell(a, mu) = c q4 / (8 mu)``."""
    return scaling_constants(a, mu)["level"]


def scaled_grid(a: float, mu: float, n_points: int = 40001, extent: float = 24.0,
                dimension: int = 3) -> RadialGrid:
    """Uniform grid covering ``extent`` soliton widths of the ``(a, mu)`` ground state."""
    c = soliton_record(3).mass / (mu * a * a)
    return RadialGrid.uniform(dimension, extent / c, n_points)


def ground_state_by_scaling(a: float, mu: float = 1.0, grid: RadialGrid | None = None
                            ) -> ScalarSolution:
    """Sample ``w(x) = (c / sqrt(mu)) Q(c x)`` with ``c = |Q|_2^2 / (mu a^2)``.

    ``lam`` is the exact value ``-c^2``; the residuals are measured on the grid.
    """
    if not (a > 0 and mu > 0):
        raise ValueError("a and mu must be positive")
    if grid is None:
        grid = scaled_grid(a, mu)
    if grid.dimension != 3:
        raise ValueError("the scaling oracle is for N = 3")
    q = soliton_record(3)
    c = q.mass / (mu * a * a)
    vals = c / np.sqrt(mu) * q.profile(c * grid.nodes)
    vals[-1] = 0.0
    u = RadialField(grid, vals)
    return make_solution(u, -c * c, a, Nonlinearity.cubic(mu), method="scaling")


# ----------------------------------------------------------------------------
# bordered Newton
# ----------------------------------------------------------------------------


def newton_scalar(u: RadialField, lam: float, nl: Nonlinearity, a: float, *,
                  tol: float = 1e-12, max_iter: int = 50):
    """Bordered Newton on ``S u - lam W u - W f(u) = 0``, ``sum w u^2 = a^2``.

    The unknowns are the free nodal values and ``lam``. The tridiagonal
    Jacobian is bordered by one column ``-W u`` and one row ``2 W u``.
    Convergence is measured in the dual norm of the preconditioner
    ``S + |lam| W`` relative to ``|lam| W u``, which stays above roundoff on
    fine grids. Returns ``(u, lam, history)``.
    """
    g = u.grid
    w = g.weights[:-1]
    diag, off = g.stiffness_bands
    diag, off = diag[:-1], off[:-1]
    v = u.values[:-1].copy()
    target = a * a
    sigma = abs(lam)

    def residual(v, lam):
        full = np.concatenate((v, [0.0]))
        r = g.stiffness_matvec(full)[:-1] - w * (lam * v + nl.f(v))
        return r, float(np.dot(w, v * v)) - target

    def merit(r, m, lam, v):
        ref = dual_norm(g, lam * w * v, sigma)
        return float(np.sqrt((dual_norm(g, r, sigma) / ref) ** 2 + (m / target) ** 2))

    r, m = residual(v, lam)
    phi = merit(r, m, lam, v)
    history = [phi]
    for _ in range(max_iter):
        if phi < tol:
            break
        ab = tridiag_to_banded(diag - w * (lam + nl.df(v)), off)
        dv, dl = bordered_solve(ab, (1, 1), (-w * v)[:, None], (2 * w * v)[:, None], -r,
                                np.array([-m]))
        t = 1.0
        while True:
            v_new = v + t * dv
            lam_new = lam + t * dl[0]
            r_new, m_new = residual(v_new, lam_new)
            phi_new = merit(r_new, m_new, lam_new, v_new)
            if np.isfinite(phi_new) and phi_new <= (1 - 1e-4 * t) * phi:
                break
            t *= 0.5
            if t < 1e-8:
                break
        if t < 1e-8:
            if phi < 1e3 * tol or np.max(np.abs(dv)) <= 1e-12 * np.max(np.abs(v)):
                break
            raise Diverged(f"line search failed at merit {phi:.3e}")
        v, lam, r, m, phi = v_new, lam_new, r_new, m_new, phi_new
        history.append(phi)
        if np.max(np.abs(t * dv)) <= 1e-14 * np.max(np.abs(v)):
            break
    else:
        if phi > 1e3 * tol:
            raise Diverged(f"no convergence in {max_iter} Newton steps (merit {phi:.3e})")
    return RadialField(g, np.concatenate((v, [0.0]))), float(lam), history


def newton_polish_scalar(sol_or_u, nl: Nonlinearity, a: float, lam: float | None = None,
                         tol: float = 1e-12, method="newton") -> ScalarSolution:
    """Newton-polish a field (or a :class:`ScalarSolution`) to a discrete solution."""
    if isinstance(sol_or_u, ScalarSolution):
        u, lam = sol_or_u.u, sol_or_u.lam if lam is None else lam
    else:
        u = sol_or_u
        if lam is None:
            lam = float(np.dot(scalar_gradient(u, nl), u.values)) / u.mass
    u, lam, hist = newton_scalar(u, lam, nl, a, tol=tol)
    return make_solution(u, lam, a, nl, method=method, history=hist)


# ----------------------------------------------------------------------------
# constrained descent on M
# ----------------------------------------------------------------------------


def scalar_pohozaev_gradient(u: RadialField, nl: Nonlinearity) -> np.ndarray:
    """Nodal gradient of ``G = K - N/2 int F~(u)``; boundary entry zero."""
    g = u.grid
    v = u.values
    dft = sum(c * (p - 2) * np.abs(v) ** (p - 2) * v for c, p in nl.terms)
    out = 2 * g.stiffness_matvec(v) - 0.5 * g.dimension * g.weights * dft
    out[-1] = 0.0
    return out


def _tangent_direction(u: RadialField, nl: Nonlinearity, grad: np.ndarray, sigma: float):
    """Sobolev gradient tangent to both the mass sphere and ``M``."""
    wu = u.grid.weights * u.values
    wu[-1] = 0.0
    normals = [wu[None, :], scalar_pohozaev_gradient(u, nl)[None, :]]
    return tangent_projection(u.grid, grad[None, :], normals, [sigma])[0]


def minimize_on_M(a: float, nl: Nonlinearity, seed: RadialField, *, grad_tol: float = 1e-6,
                  max_iter: int = 3000, polish: bool = True, newton_tol: float = 1e-12,
                  armijo=(1.0, 0.5, 1e-4)) -> ScalarSolution:
    """Ground state as the minimiser of ``I`` on ``M`` at mass ``a^2``.

    Each iteration takes an Armijo step along the preconditioned tangent
    gradient, renormalises the mass and projects back onto ``M`` by a
    dilation. The seed is replaced by ``|seed|``; a converged profile that
    still changes sign triggers one restart from its absolute value. With
    ``polish`` the result is finished by bordered Newton on the same grid.
    """
    if seed.sup() == 0:
        raise ValueError("seed must be nonzero")
    target = a * a
    step0, shrink, c1 = armijo
    u = seed.abs().normalized(target)
    restarts = 0
    fails = 0
    try:
        u, _ = project_to_M(u, nl)
    except NonConvergence:
        fails += 1
    energy = scalar_energy_I(u, nl)
    history = []
    lam = 0.0
    for it in range(max_iter):
        grad = scalar_gradient(u, nl)
        lam = float(np.dot(grad, u.values)) / u.mass
        sigma = max(-lam, u.grad_norm_sq / target)
        d = _tangent_direction(u, nl, grad, sigma)
        slope = float(np.dot(grad, d))
        ref = lam * u.grid.weights * u.values
        gnorm = np.sqrt(max(slope, 0.0)) / max(dual_norm(u.grid, ref[:-1], sigma), 1e-300)
        history.append(gnorm)
        if gnorm < grad_tol:
            if u.values.min() < -1e-8 * u.sup() and restarts == 0:
                restarts += 1
                u = u.abs()
                continue
            break
        t = step0
        while True:
            trial = u.with_values(u.values - t * d).normalized(target)
            try:
                trial, _ = project_to_M(trial, nl)
                e_new = scalar_energy_I(trial, nl)
                ok = e_new <= energy - c1 * t * slope
            except NonConvergence:
                fails += 1
                if fails > 20:
                    raise
                ok = False
            if ok:
                break
            t *= shrink
            if t < 1e-12:
                break
        if t < 1e-12:
            if gnorm < 100 * grad_tol:
                break
            raise NonConvergence(f"Armijo search failed with gradient norm {gnorm:.2e}")
        u, energy = trial, e_new
    else:
        raise MaxIterations(f"no convergence in {max_iter} iterations (gradient {history[-1]:.2e})")
    if polish:
        v, lam, hist = newton_scalar(u, lam, nl, a, tol=newton_tol)
        if v.values.min() < -1e-8 * v.sup():
            v = v.abs()
        return make_solution(v, lam, a, nl, method="descent+newton", history=history + list(hist))
    return make_solution(u, lam, a, nl, method="descent", history=history)


# ----------------------------------------------------------------------------
# node-indexed states
# ----------------------------------------------------------------------------


def profile_grid(prof: ShotProfile, n_points: int, tail_widths: float = 26.0) -> RadialGrid:
    """Graded grid matched to a shot profile.

    The radius is the last zero plus ``tail_widths`` decay lengths. The
    sinh stretch makes the ratio of outer to inner spacing equal to the ratio
    of the decay length ``1/kappa`` to the core length
    ``sqrt(N u0 / |Delta u(0)|)``.
    """
    nl = prof.nonlinearity
    b = prof.amplitude
    curv = abs(float(nl.f(b)) + prof.lam * b)
    core = np.sqrt(nl.dimension * b / curv) if curv > 0 else 1 / prof.kappa
    ratio = max((1 / prof.kappa) / core, 1.0)
    r_last = prof.zero_radii[-1] if prof.zero_radii else 0.0
    return RadialGrid.graded(nl.dimension, r_last + tail_widths / prof.kappa, n_points,
                             stretch=float(np.arccosh(ratio)))


def excited_state_by_nodes(a: float, nl: Nonlinearity, k: int, *, k_max: int = 4,
                           n_points: int = 10001, tail_widths: float = 26.0,
                           shoot_tol: float = 1e-11, mass_rtol: float = 1e-9,
                           pohozaev_target: float = 1e-6, n_max: int = 2**19 + 1,
                           polish: bool = True, grid: RadialGrid | None = None
                           ) -> ScalarSolution:
    """Radial solution with exactly ``k`` sign changes and mass ``a^2``.

    Outer loop: secant iteration on ``t = log(-lam)`` for ``log mass = 2 log a``,
    switching to Brent once the root is bracketed. Inner loop: amplitude
    bisection in :func:`shoot_profile`. The shot profile is sampled on the
    graded grid of :func:`profile_grid` and polished by bordered Newton; the
    grid is doubled until the discrete Pohozaev residual is below
    ``pohozaev_target`` (unless ``grid`` is given).
    """
    if k < 0 or k > k_max:
        raise NodeTargetUnreachable(f"k = {k} outside [0, {k_max}]")
    target = np.log(a * a)
    cache = {}

    def h(t):
        if t not in cache:
            cache[t] = shoot_profile(nl, -np.exp(t), k, tol=shoot_tol)
        return np.log(cache[t].mass) - target

    t0, t1 = 0.0, 0.5
    h0, h1 = h(t0), h(t1)
    bracket = None
    for _ in range(80):
        if abs(h1) < mass_rtol:
            break
        if h0 * h1 < 0:
            bracket = (min(t0, t1), max(t0, t1))
            break
        if h1 == h0:
            raise NonConvergence("mass insensitive to the frequency")
        t2 = t1 - h1 * (t1 - t0) / (h1 - h0)
        t2 = float(np.clip(t2, t1 - 4.0, t1 + 4.0))
        t0, h0, t1, h1 = t1, h1, t2, h(t2)
    else:
        raise NonConvergence("frequency iteration did not reach the target mass")
    if bracket is not None:
        t1 = brentq(h, *bracket, xtol=1e-13, rtol=1e-13)
        h(t1)
    prof = cache[t1]
    lam = prof.lam
    if grid is not None:
        grids = [grid]
    else:
        grids = []
        n = n_points
        while n <= n_max:
            grids.append(profile_grid(prof, n, tail_widths))
            n = 2 * n - 1
    sol = None
    failure = None
    for g in grids:
        vals = prof.profile(g.nodes)
        vals[-1] = 0.0
        u = RadialField(g, vals)
        if not polish:
            return make_solution(u, lam, a, nl, method="shooting")
        try:
            v, lam2, hist = newton_scalar(u, lam, nl, a)
        except (Diverged, SingularJacobian) as exc:
            failure = exc
            continue
        sol = make_solution(v, lam2, a, nl, method="shooting+newton", history=hist)
        if sol.pohozaev_residual <= pohozaev_target:
            break
    if sol is None:
        raise failure
    if sol.node_count != k:
        warnings.warn(f"polished state has {sol.node_count} nodes, expected {k}",
                      RuntimeWarning, stacklevel=2)
    return sol
