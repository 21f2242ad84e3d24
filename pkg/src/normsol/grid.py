"""Radial grids, quadrature and the discrete operators built on them.

The discretisation is a vertex-centred finite-volume scheme on ``[0, r_max]``.
Node ``j`` owns the spherical shell between the neighbouring face midpoints,
so the quadrature weights are exact shell volumes and sum to the volume of
the ball of radius ``r_max``. The Dirichlet-energy form

    K(u) = sum_j A_{j+1/2} (u_{j+1} - u_j)^2,

with face conductances ``A = |S^{N-1}| f^{N-1} / (r_{j+1} - r_j)``, defines
the stiffness matrix ``S``; the discrete Laplacian is ``-Delta u = S u / w``.
This operator is exactly symmetric in the weighted inner product and reduces
to ``-N u''(0)`` at the origin.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma

from .errors import DilationOutOfRange, TruncationWarning

S_CAP = 5.0


def sphere_area(dim: int) -> float:
    """Surface area of the unit sphere in R^dim."""
    return 2.0 * np.pi ** (dim / 2) / gamma(dim / 2)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes ``0 = r_0 < ... < r_{n-1} = r_max`` in R^N.

    Use :meth:`uniform` or :meth:`graded` rather than passing ``nodes``
    directly, unless a custom node set is wanted.
    """

    dimension: int
    r_max: float
    n_points: int
    nodes: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.dimension < 2:
            raise ValueError("dimension must be >= 2")
        if self.n_points < 3:
            raise ValueError("need at least 3 grid points")
        r = self.nodes
        if r is None:
            r = np.linspace(0.0, self.r_max, self.n_points)
        r = np.array(r, dtype=float)
        if r.shape != (self.n_points,) or r[0] != 0.0 or not np.all(np.diff(r) > 0):
            raise ValueError("nodes must start at 0 and increase strictly")
        if not np.isclose(r[-1], self.r_max, rtol=1e-14, atol=0):
            raise ValueError("last node must equal r_max")
        r.flags.writeable = False
        object.__setattr__(self, "nodes", r)

    @classmethod
    def uniform(cls, dimension: int, r_max: float, n_points: int) -> "RadialGrid":
        return cls(dimension, float(r_max), int(n_points))

    @classmethod
    def graded(cls, dimension, r_max, n_points, stretch=3.0):
        """Nodes clustered towards the origin, ``r = r_max sinh(k t)/sinh(k)``."""
        t = np.linspace(0.0, 1.0, n_points)
        if stretch <= 0:
            r = r_max * t
        else:
            r = r_max * np.sinh(stretch * t) / np.sinh(stretch)
        r[-1] = r_max
        return cls(dimension, float(r_max), int(n_points), r)

    def refined(self, factor: int = 2) -> "RadialGrid":
        """Same domain with ``factor`` times as many intervals."""
        n = (self.n_points - 1) * factor + 1
        if self.is_uniform:
            return RadialGrid.uniform(self.dimension, self.r_max, n)
        t_old = np.linspace(0.0, 1.0, self.n_points)
        t_new = np.linspace(0.0, 1.0, n)
        r = np.interp(t_new, t_old, self.nodes)
        return RadialGrid(self.dimension, self.r_max, n, r)

    @cached_property
    def is_uniform(self) -> bool:
        h = np.diff(self.nodes)
        return bool(np.allclose(h, h[0], rtol=1e-12, atol=0))

    @cached_property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h(self) -> float:
        """Largest node spacing."""
        return float(self.spacing.max())

    @cached_property
    def omega(self) -> float:
        return sphere_area(self.dimension)

    @cached_property
    def faces(self) -> np.ndarray:
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    @cached_property
    def weights(self) -> np.ndarray:
        n = self.dimension
        edges = np.concatenate(([0.0], self.faces, [self.r_max]))
        w = self.omega / n * (edges[1:] ** n - edges[:-1] ** n)
        w.flags.writeable = False
        return w

    @cached_property
    def conductance(self) -> np.ndarray:
        c = self.omega * self.faces ** (self.dimension - 1) / self.spacing
        c.flags.writeable = False
        return c

    @cached_property
    def stiffness_bands(self) -> tuple[np.ndarray, np.ndarray]:
        """(diagonal, superdiagonal) of the full n x n stiffness matrix."""
        c = self.conductance
        diag = np.zeros(self.n_points)
        diag[:-1] += c
        diag[1:] += c
        return diag, -c

    def stiffness_matvec(self, u: np.ndarray) -> np.ndarray:
        diag, off = self.stiffness_bands
        out = diag * u
        out[:-1] += off * u[1:]
        out[1:] += off * u[:-1]
        return out

    def volume(self) -> float:
        """Exact volume of the ball of radius ``r_max``."""
        return self.omega * self.r_max**self.dimension / self.dimension

    def field(self, values) -> "RadialField":
        return RadialField(self, values)

    def sample(self, fn) -> "RadialField":
        """Evaluate ``fn(r)`` at the nodes."""
        return RadialField(self, fn(self.nodes))

    def zeros(self) -> "RadialField":
        return RadialField(self, np.zeros(self.n_points))


@dataclass(frozen=True, eq=False)
class RadialField:
    """Real amplitudes of a radial function at the nodes of ``grid``.

    Instances are immutable; the quadratures below are memoised on first use.
    """

    grid: RadialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise ValueError(
                f"expected {self.grid.n_points} values, got shape {v.shape}"
            )
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    @cached_property
    def mass(self) -> float:
        return float(np.dot(self.grid.weights, self.values**2))

    @cached_property
    def grad_norm_sq(self) -> float:
        du = np.diff(self.values)
        return float(np.dot(self.grid.conductance, du * du))

    @cached_property
    def quartic(self) -> float:
        return float(np.dot(self.grid.weights, self.values**4))

    def power_integral(self, p: float) -> float:
        """Quadrature of ``|u|^p``."""
        if p == 4:
            return self.quartic
        if p == 2:
            return self.mass
        return float(np.dot(self.grid.weights, np.abs(self.values) ** p))

    def integrate(self, density: np.ndarray) -> float:
        return float(np.dot(self.grid.weights, density))

    def inner(self, other: "RadialField") -> float:
        return float(np.dot(self.grid.weights, self.values * other.values))

    def norm(self) -> float:
        return float(np.sqrt(self.mass))

    def with_values(self, values) -> "RadialField":
        return RadialField(self.grid, values)

    def scaled(self, factor: float) -> "RadialField":
        return RadialField(self.grid, factor * self.values)

    def normalized(self, mass: float) -> "RadialField":
        """Rescale the amplitude so that the quadrature mass equals ``mass``."""
        m = self.mass
        if m == 0:
            raise ValueError("cannot normalise the zero field")
        return self.scaled(np.sqrt(mass / m))

    def abs(self) -> "RadialField":
        return RadialField(self.grid, np.abs(self.values))

    def __neg__(self) -> "RadialField":
        return RadialField(self.grid, -self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def node_count(self, rel_floor: float = 1e-10) -> int:
        """Strict sign changes along the grid, ignoring values below the floor."""
        v = self.values
        keep = np.abs(v) > rel_floor * max(self.sup(), np.finfo(float).tiny)
        s = np.sign(v[keep])
        return int(np.count_nonzero(s[1:] != s[:-1]))

    def max_slope(self) -> float:
        """Largest finite-difference slope, a discrete Lipschitz constant."""
        return float(np.max(np.abs(np.diff(self.values)) / self.grid.spacing))

    def boundary_ratio(self, band: float = 0.05) -> float:
        """Largest ``|u|`` on the outer ``band`` fraction of the domain over ``sup|u|``.

        The boundary node itself is pinned to zero by the Dirichlet
        condition, so the tail is measured on a band next to it.
        """
        peak = self.sup()
        if peak == 0:
            return 0.0
        outer = self.grid.nodes >= (1.0 - band) * self.grid.r_max
        return float(np.max(np.abs(self.values[outer])) / peak)


def mass(u: RadialField) -> float:
    """Quadrature of ``u^2`` over the ball."""
    return u.mass


def grad_norm_sq(u: RadialField) -> float:
    """Quadrature of ``|grad u|^2`` from the finite-volume Dirichlet form."""
    return u.grad_norm_sq


def apply_laplacian(u: RadialField) -> RadialField:
    """Discrete ``-Delta u``; the boundary node is returned as zero."""
    g = u.grid
    out = g.stiffness_matvec(u.values) / g.weights
    out[-1] = 0.0
    return RadialField(g, out)


def overlap(u: RadialField, v: RadialField) -> float:
    """Quadrature of ``u^2 v^2``."""
    return float(np.dot(u.grid.weights, (u.values * v.values) ** 2))


def dilate(u: RadialField, s: float, s_cap: float = S_CAP) -> RadialField:
    """Mass-preserving dilation ``e^{Ns/2} u(e^s r)``.

    Resampling uses a monotone cubic (PCHIP) interpolant of the even
    extension of ``u``, with zero extension beyond ``r_max``. The boundary node
    is reset to zero. Mass drift from resampling is left in place; compare
    ``mass`` before and after to measure it.
    """
    if abs(s) > s_cap:
        raise DilationOutOfRange(f"|s| = {abs(s):.3g} exceeds s_cap = {s_cap}")
    if s == 0:
        return u
    g = u.grid
    r = g.nodes
    rr = np.concatenate((-r[:0:-1], r))
    vv = np.concatenate((u.values[:0:-1], u.values))
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        interp = PchipInterpolator(rr, vv, extrapolate=False)
    x = np.exp(s) * r
    vals = interp(np.minimum(x, g.r_max))
    vals[x > g.r_max] = 0.0
    vals = np.nan_to_num(vals, nan=0.0)
    vals[-1] = 0.0
    return RadialField(g, np.exp(g.dimension * s / 2) * vals)


def resample(u: RadialField, grid: RadialGrid) -> RadialField:
    """Transfer ``u`` onto another grid by monotone cubic interpolation."""
    r = u.grid.nodes
    rr = np.concatenate((-r[:0:-1], r))
    vv = np.concatenate((u.values[:0:-1], u.values))
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        interp = PchipInterpolator(rr, vv, extrapolate=False)
    x = grid.nodes
    vals = np.nan_to_num(interp(np.minimum(x, u.grid.r_max)), nan=0.0)
    vals[x > u.grid.r_max] = 0.0
    vals[-1] = 0.0
    return RadialField(grid, vals)


def warn_if_truncated(u: RadialField, tol: float = 1e-8) -> float:
    """Emit :class:`TruncationWarning` if the tail is above ``tol * sup|u|``."""
    ratio = u.boundary_ratio()
    if ratio >= tol:
        warnings.warn(
            f"tail/peak = {ratio:.2e} at r_max = {u.grid.r_max:g}; enlarge the domain",
            TruncationWarning,
            stacklevel=2,
        )
    return ratio
