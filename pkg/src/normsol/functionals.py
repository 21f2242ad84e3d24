"""Energies, Pohozaev constraints, fiber maps and projections.

System (N = 3, cubic)::

    J(u1, u2) = K/2 - P/4,        G(u1, u2) = K - 3P/4,
    K = sum_i int |grad u_i|^2,   P = sum_ij beta_ij int u_i^2 u_j^2,

with ``beta_11 = mu1``, ``beta_22 = mu2``, ``beta_12 = beta_21 = beta``.

Scalar (any N >= 2, power-sum ``f``)::

    I(u) = 1/2 int |grad u|^2 - int F(u),
    G(u) = int |grad u|^2 - N/2 int (f(u) u - 2 F(u)).

The kinetic term carries the factor 1/2 in both ``J`` and ``I``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import ExponentOutOfRange, NonConvergence, NotInCone, ZeroField
from .grid import S_CAP, RadialField, dilate

PROJ_TOL = 1e-10


# ----------------------------------------------------------------------------
# data
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class CouplingParams:
    mu1: float
    mu2: float
    beta: float
    a1: float
    a2: float

    def __post_init__(self):
        for name in ("mu1", "mu2", "a1", "a2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.mu1, self.beta], [self.beta, self.mu2]])

    def swapped(self) -> "CouplingParams":
        return CouplingParams(self.mu2, self.mu1, self.beta, self.a2, self.a1)

    def with_beta(self, beta: float) -> "CouplingParams":
        return CouplingParams(self.mu1, self.mu2, beta, self.a1, self.a2)

    @property
    def cone_is_everything(self) -> bool:
        """True when the quartic form is positive for every nonzero pair."""
        return self.beta > -np.sqrt(self.mu1 * self.mu2)


@dataclass(frozen=True, eq=False)
class StatePair:
    u1: RadialField
    u2: RadialField
    params: CouplingParams

    def __post_init__(self):
        if self.u1.grid is not self.u2.grid:
            raise ValueError("components must share one grid")

    @property
    def grid(self):
        return self.u1.grid

    @cached_property
    def kinetic(self) -> float:
        return self.u1.grad_norm_sq + self.u2.grad_norm_sq

    @cached_property
    def overlap(self) -> float:
        w = self.grid.weights
        return float(np.dot(w, (self.u1.values * self.u2.values) ** 2))

    @cached_property
    def quartic_form(self) -> float:
        p = self.params
        return p.mu1 * self.u1.quartic + p.mu2 * self.u2.quartic + 2 * p.beta * self.overlap

    @property
    def masses(self) -> tuple[float, float]:
        return self.u1.mass, self.u2.mass

    def mass_error(self) -> float:
        """Largest relative deviation of the masses from ``a_i^2``."""
        p = self.params
        return max(abs(self.u1.mass / p.a1**2 - 1), abs(self.u2.mass / p.a2**2 - 1))

    def with_fields(self, u1, u2) -> "StatePair":
        return StatePair(u1, u2, self.params)

    def with_params(self, params: CouplingParams) -> "StatePair":
        return StatePair(self.u1, self.u2, params)

    def swapped(self) -> "StatePair":
        return StatePair(self.u2, self.u1, self.params.swapped())

    def __neg__(self) -> "StatePair":
        return StatePair(-self.u1, -self.u2, self.params)

    def abs(self) -> "StatePair":
        return StatePair(self.u1.abs(), self.u2.abs(), self.params)

    def normalized(self) -> "StatePair":
        p = self.params
        return StatePair(self.u1.normalized(p.a1**2), self.u2.normalized(p.a2**2), p)

    def dilated(self, s: float, s_cap: float = S_CAP) -> "StatePair":
        return StatePair(dilate(self.u1, s, s_cap), dilate(self.u2, s, s_cap), self.params)

    def stacked(self) -> np.ndarray:
        return np.stack([self.u1.values, self.u2.values])


# ----------------------------------------------------------------------------
# system functionals
# ----------------------------------------------------------------------------


def energy_J(p: StatePair) -> float:
    return 0.5 * p.kinetic - 0.25 * p.quartic_form


def constraint_G(p: StatePair) -> float:
    return p.kinetic - 0.75 * p.quartic_form


def in_cone_E(p: StatePair) -> bool:
    return p.quartic_form > 0


def fiber_value(p: StatePair, s) -> float | np.ndarray:
    """``J(s * p)`` from the cached integrals, without resampling."""
    s = np.asarray(s, dtype=float)
    return 0.5 * np.exp(2 * s) * p.kinetic - 0.25 * np.exp(3 * s) * p.quartic_form


def fiber_argmax(kinetic: float, quartic_form: float) -> float:
    """Unique critical point ``s`` of ``e^{2s} K/2 - e^{3s} P/4`` (needs P > 0)."""
    if not quartic_form > 0:
        raise NotInCone(f"quartic form {quartic_form:.3e} is not positive")
    if not kinetic > 0:
        raise ZeroField("kinetic energy vanishes")
    return float(np.log(4 * kinetic / (3 * quartic_form)))


def system_gradient(p: StatePair) -> np.ndarray:
    """Nodal gradient of ``J``, shape (2, n); boundary entries are zero.

    Row ``i`` is ``S u_i - w (mu_i u_i^3 + beta u_j^2 u_i)``, the exact
    derivative of the discrete energy with respect to the nodal values.
    """
    g = p.grid
    par = p.params
    u1, u2 = p.u1.values, p.u2.values
    w = g.weights
    g1 = g.stiffness_matvec(u1) - w * (par.mu1 * u1**3 + par.beta * u2**2 * u1)
    g2 = g.stiffness_matvec(u2) - w * (par.mu2 * u2**3 + par.beta * u1**2 * u2)
    out = np.stack([g1, g2])
    out[:, -1] = 0.0
    return out


def pohozaev_gradient(p: StatePair) -> np.ndarray:
    """Nodal gradient of ``G``, shape (2, n)."""
    g = p.grid
    par = p.params
    u1, u2 = p.u1.values, p.u2.values
    w = g.weights
    g1 = 2 * g.stiffness_matvec(u1) - 3 * w * (par.mu1 * u1**3 + par.beta * u2**2 * u1)
    g2 = 2 * g.stiffness_matvec(u2) - 3 * w * (par.mu2 * u2**3 + par.beta * u1**2 * u2)
    out = np.stack([g1, g2])
    out[:, -1] = 0.0
    return out


def multipliers(p: StatePair) -> tuple[float, float]:
    """Lagrange multipliers ``lambda_i = <J'(u), u_i>_i / a_i^2``."""
    grad = system_gradient(p)
    lam1 = float(np.dot(grad[0], p.u1.values)) / p.u1.mass
    lam2 = float(np.dot(grad[1], p.u2.values)) / p.u2.mass
    return lam1, lam2


def project_to_P(p: StatePair, *, tol: float = PROJ_TOL, renormalize: bool = True,
                 s_cap: float = S_CAP, return_info: bool = False):
    """Dilate ``p`` onto the Pohozaev set ``G = 0``.

    The closed-form maximiser of the fiber map gives the starting value; it
    is then refined by a scalar root solve on ``s -> G(s * p)`` evaluated on
    the resampled fields, so that ``|G| <= tol (K + |P|)`` holds for the
    returned pair rather than only for the cached integrals. With
    ``renormalize`` the dilated components are rescaled to their target
    masses inside the root solve; the resampling drift that this removes is
    reported in ``info["mass_drift"]``.

    Returns ``(pair, s)`` or ``(pair, s, info)``.
    """
    if not in_cone_E(p):
        raise NotInCone(f"quartic form {p.quartic_form:.3e} <= 0; fiber map has no critical point")
    scale0 = p.kinetic + abs(p.quartic_form)
    if abs(constraint_G(p)) <= tol * scale0:
        info = dict(s_closed=0.0, residual=abs(constraint_G(p)) / scale0, mass_drift=0.0)
        return (p, 0.0, info) if return_info else (p, 0.0)

    s0 = fiber_argmax(p.kinetic, p.quartic_form)

    def transformed(s):
        q = p.dilated(s, s_cap)
        if renormalize:
            q = q.normalized()
        return q

    def g_of(s):
        q = transformed(s)
        return constraint_G(q) / (q.kinetic + abs(q.quartic_form))

    s = _root_near(g_of, s0, s_cap=s_cap)
    q = transformed(s)
    raw = p.dilated(s, s_cap)
    drift = max(abs(raw.u1.mass / p.u1.mass - 1), abs(raw.u2.mass / p.u2.mass - 1))
    res = abs(constraint_G(q)) / (q.kinetic + abs(q.quartic_form))
    if res > tol:
        raise NonConvergence(f"projection residual {res:.2e} above tolerance {tol:.1e}")
    info = dict(s_closed=s0, residual=res, mass_drift=drift)
    return (q, s, info) if return_info else (q, s)


def _root_near(fn, s0, s_cap=S_CAP, step=1e-3):
    """Root of a decreasing function near ``s0`` by bracketing and Brent."""
    f0 = fn(s0)
    if f0 == 0:
        return s0
    direction = 1.0 if f0 > 0 else -1.0
    lo, flo = s0, f0
    d = step
    while True:
        hi = s0 + direction * d
        if abs(hi) > s_cap:
            raise NonConvergence("fiber root not bracketed inside the dilation cap")
        fhi = fn(hi)
        if np.sign(fhi) != np.sign(flo):
            break
        lo, flo = hi, fhi
        d *= 4
    a, b = sorted((lo, hi))
    return brentq(fn, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


# ----------------------------------------------------------------------------
# scalar functionals
# ----------------------------------------------------------------------------


def critical_exponent(dim: int) -> float:
    return np.inf if dim <= 2 else 2 * dim / (dim - 2)


@dataclass(frozen=True)
class Nonlinearity:
    """Power sum ``f(s) = sum_i mu_i |s|^{p_i - 2} s`` with ``mu_i > 0``.

    Exponents must sit strictly between the mass-critical ``2 + 4/N`` and the
    Sobolev exponent ``2N/(N-2)``.
    """

    terms: tuple[tuple[float, float], ...]
    dimension: int = 3

    def __post_init__(self):
        terms = tuple((float(c), float(p)) for c, p in self.terms)
        if not terms:
            raise ValueError("need at least one term")
        object.__setattr__(self, "terms", terms)
        lo = 2 + 4 / self.dimension
        hi = critical_exponent(self.dimension)
        for c, p in terms:
            if not c > 0:
                raise ValueError("coefficients must be positive")
            if not lo < p < hi:
                raise ExponentOutOfRange(
                    f"exponent {p} outside ({lo:.4g}, {hi:.4g}) for N={self.dimension}"
                )

    @classmethod
    def cubic(cls, mu: float = 1.0, dimension: int = 3) -> "Nonlinearity":
        return cls(((mu, 4.0),), dimension)

    @classmethod
    def power_sum(cls, coeffs: Sequence[float], exponents: Sequence[float], dimension=3):
        return cls(tuple(zip(coeffs, exponents)), dimension)

    @property
    def alpha_exp(self) -> float:
        return min(p for _, p in self.terms)

    @property
    def beta_exp(self) -> float:
        return max(p for _, p in self.terms)

    @property
    def is_cubic(self) -> bool:
        return len(self.terms) == 1 and self.terms[0][1] == 4.0

    def f(self, u):
        u = np.asarray(u, dtype=float)
        a = np.abs(u)
        return sum(c * a ** (p - 2) * u for c, p in self.terms)

    def df(self, u):
        a = np.abs(np.asarray(u, dtype=float))
        return sum(c * (p - 1) * a ** (p - 2) for c, p in self.terms)

    def F(self, u):
        a = np.abs(np.asarray(u, dtype=float))
        return sum(c / p * a**p for c, p in self.terms)

    def F_tilde(self, u):
        """``f(u) u - 2 F(u)``."""
        a = np.abs(np.asarray(u, dtype=float))
        return sum(c * (1 - 2 / p) * a**p for c, p in self.terms)


def scalar_energy_I(u: RadialField, nl: Nonlinearity) -> float:
    return 0.5 * u.grad_norm_sq - sum(c / p * u.power_integral(p) for c, p in nl.terms)


def scalar_constraint_G(u: RadialField, nl: Nonlinearity) -> float:
    n = u.grid.dimension
    ft = sum(c * (1 - 2 / p) * u.power_integral(p) for c, p in nl.terms)
    return u.grad_norm_sq - 0.5 * n * ft


def potential_integral(u: RadialField, nl: Nonlinearity) -> float:
    """Quadrature of ``F(u)``."""
    return sum(c / p * u.power_integral(p) for c, p in nl.terms)


def scalar_gradient(u: RadialField, nl: Nonlinearity) -> np.ndarray:
    """Nodal gradient of ``I``: ``S u - w f(u)``; boundary entry zero."""
    g = u.grid
    out = g.stiffness_matvec(u.values) - g.weights * nl.f(u.values)
    out[-1] = 0.0
    return out


def scalar_fiber_value(u: RadialField, nl: Nonlinearity, s):
    """``I(s * u)`` from cached moments ``int |u|^p``."""
    s = np.asarray(s, dtype=float)
    n = u.grid.dimension
    val = 0.5 * np.exp(2 * s) * u.grad_norm_sq
    for c, p in nl.terms:
        val = val - c / p * np.exp(n * (p - 2) / 2 * s) * u.power_integral(p)
    return val


def scalar_fiber_derivative(u: RadialField, nl: Nonlinearity, s):
    """``d/ds I(s * u) = e^{2s} K - N/2 e^{-Ns} int F~(e^{Ns/2} u)``."""
    s = np.asarray(s, dtype=float)
    n = u.grid.dimension
    val = np.exp(2 * s) * u.grad_norm_sq
    for c, p in nl.terms:
        val = val - 0.5 * n * c * (1 - 2 / p) * np.exp(n * (p - 2) / 2 * s) * u.power_integral(p)
    return val


def _scalar_fiber_second(u, nl, s):
    n = u.grid.dimension
    val = 2 * np.exp(2 * s) * u.grad_norm_sq
    for c, p in nl.terms:
        g = n * (p - 2) / 2
        val = val - 0.5 * n * c * (1 - 2 / p) * g * np.exp(g * s) * u.power_integral(p)
    return val


def scalar_fiber_argmax(u: RadialField, nl: Nonlinearity, s_cap: float = S_CAP) -> float:
    """Unique maximiser of the scalar fiber map from cached moments.

    Cubic terms use the closed form; otherwise the bracket ``[-s_cap, s_cap]``
    is widened geometrically until the derivative changes sign, then
    bisection to 1e-12 is followed by two Newton steps.
    """
    if u.sup() == 0:
        raise ZeroField("cannot project the zero field")
    n = u.grid.dimension
    if nl.is_cubic and n == 3:
        c = nl.terms[0][0]
        return float(np.log(4 * u.grad_norm_sq / (3 * c * u.quartic)))

    def d(s):
        return float(scalar_fiber_derivative(u, nl, s))

    lo, hi = -s_cap, s_cap
    while d(lo) <= 0:
        lo *= 2
        if lo < -1e3:
            raise NonConvergence("fiber derivative never positive")
    while d(hi) >= 0:
        hi *= 2
        if hi > 1e3:
            raise NonConvergence("fiber derivative never negative")
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if d(mid) > 0:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    for _ in range(2):
        d2 = float(_scalar_fiber_second(u, nl, s))
        if d2 != 0:
            step = d(s) / d2
            if abs(step) < 1e-6:
                s -= step
    return s


def project_to_M(u: RadialField, nl: Nonlinearity, *, tol: float = PROJ_TOL,
                 renormalize: bool = True, s_cap: float = S_CAP, return_info: bool = False):
    """Dilate ``u`` onto ``{G = 0}`` at fixed mass.

    Same contract as :func:`project_to_P`: the fiber maximiser computed from
    cached moments seeds a root solve on the resampled field.
    """
    if u.sup() == 0:
        raise ZeroField("cannot project the zero field")
    target = u.mass

    def scale(v):
        return v.grad_norm_sq + 0.5 * v.grid.dimension * sum(
            c * (1 - 2 / p) * v.power_integral(p) for c, p in nl.terms)

    if abs(scalar_constraint_G(u, nl)) <= tol * scale(u):
        info = dict(s_closed=0.0, residual=abs(scalar_constraint_G(u, nl)) / scale(u),
                    mass_drift=0.0)
        return (u, 0.0, info) if return_info else (u, 0.0)

    s0 = scalar_fiber_argmax(u, nl, s_cap=s_cap)

    def transformed(s):
        v = dilate(u, s, s_cap=s_cap)
        return v.normalized(target) if renormalize else v

    def g_of(s):
        v = transformed(s)
        return scalar_constraint_G(v, nl) / scale(v)

    s = _root_near(g_of, s0, s_cap=s_cap)
    v = transformed(s)
    drift = abs(dilate(u, s, s_cap=s_cap).mass / target - 1)
    res = abs(scalar_constraint_G(v, nl)) / scale(v)
    if res > tol:
        raise NonConvergence(f"projection residual {res:.2e} above tolerance {tol:.1e}")
    info = dict(s_closed=s0, residual=res, mass_drift=drift)
    return (v, s, info) if return_info else (v, s)
