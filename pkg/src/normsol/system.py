"""Normalized solutions of the two-component cubic system in R^3.

    -Delta u_i - lambda_i u_i = mu_i u_i^3 + beta u_j^2 u_i,   int u_i^2 = a_i^2.

The pipeline is: :func:`build_endpoints` constructs the disjoint-support
path on the Pohozaev set, :func:`mountain_pass_on_P` deforms it into a
minimax path whose top node seeds :func:`newton_polish`, and
:func:`continue_in_beta` follows the solution towards strong repulsion.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._linalg import bordered_solve, dual_norm, riesz, tangent_projection
from .errors import (ContinuationStalled, DilationOutOfRange, Diverged, EnergyBudgetExceeded,
                     LiouvilleSuspect, MaxIterations, NonConvergence, NotInCone, SingularJacobian,
                     StagnationError, SupportOverlap)
from .functionals import (CouplingParams, Nonlinearity, StatePair, constraint_G, energy_J,
                          multipliers, pohozaev_gradient, project_to_M,
                          project_to_P, system_gradient)
from .grid import RadialField, RadialGrid, resample
from .scalar import ground_state_level, scaling_constants, soliton_record

log = logging.getLogger(__name__)


# ----------------------------------------------------------------------------
# solutions
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SystemSolution:
    pair: StatePair
    lambda1: float
    lambda2: float
    energy: float
    G_residual: float
    el_residual: float
    overlap: float
    mass_error: float
    history: tuple = field(default=(), repr=False)
    method: str = ""

    @property
    def params(self) -> CouplingParams:
        return self.pair.params

    @property
    def grid(self) -> RadialGrid:
        return self.pair.grid

    @property
    def liouville_suspect(self) -> bool:
        return not (self.lambda1 < 0 and self.lambda2 < 0)

    @property
    def c(self) -> float:
        return self.energy

    def accepted(self, res_tol=1e-8, mass_tol=1e-10, G_tol=1e-8) -> bool:
        return (not self.liouville_suspect and self.el_residual <= res_tol
                and self.mass_error <= mass_tol and self.G_residual <= G_tol)

    def min_ratio(self) -> float:
        """``min_j u_ij / sup u_i`` over both components (positivity check)."""
        return min(self.pair.u1.values.min() / self.pair.u1.sup(),
                   self.pair.u2.values.min() / self.pair.u2.sup())

    def summary(self) -> dict:
        p = self.params
        return dict(beta=p.beta, lambda1=self.lambda1, lambda2=self.lambda2, c=self.energy,
                    G_residual=self.G_residual, el_residual=self.el_residual,
                    overlap=self.overlap, mass_error=self.mass_error,
                    liouville_suspect=self.liouville_suspect, method=self.method)


def system_residual(pair: StatePair, lam1: float, lam2: float) -> np.ndarray:
    """Nodal residual ``S u_i - w (lam_i u_i + mu_i u_i^3 + beta u_j^2 u_i)``, shape (2, n)."""
    grad = system_gradient(pair)
    w = pair.grid.weights
    out = grad - np.stack([lam1 * w * pair.u1.values, lam2 * w * pair.u2.values])
    out[:, -1] = 0.0
    return out


def system_el_residual(pair: StatePair, lam1: float, lam2: float) -> float:
    """Larger of the two relative dual-norm residuals, as in the scalar solver."""
    r = system_residual(pair, lam1, lam2)
    g = pair.grid
    out = 0.0
    for i, (u, lam) in enumerate(((pair.u1, lam1), (pair.u2, lam2))):
        sigma = max(abs(lam), 1e-300)
        scale = dual_norm(g, sigma * g.weights * u.values, sigma)
        out = max(out, dual_norm(g, r[i], sigma) / max(scale, 1e-300))
    return out


def make_system_solution(pair, lam1, lam2, history=(), method="") -> SystemSolution:
    k = pair.kinetic
    return SystemSolution(pair=pair, lambda1=float(lam1), lambda2=float(lam2),
                          energy=energy_J(pair), G_residual=abs(constraint_G(pair)) / k,
                          el_residual=system_el_residual(pair, lam1, lam2),
                          overlap=pair.overlap, mass_error=pair.mass_error(),
                          history=tuple(history), method=method)


# ----------------------------------------------------------------------------
# bordered Newton
# ----------------------------------------------------------------------------


def _interleave(a, b):
    out = np.empty(2 * a.size)
    out[0::2] = a
    out[1::2] = b
    return out


def _jacobian_bands(grid, v1, v2, lam1, lam2, par):
    """Band storage (l = u = 2) of the interleaved PDE Jacobian on free nodes."""
    m = v1.size
    w = grid.weights[:m]
    diag, off = grid.stiffness_bands
    diag, off = diag[:m], off[:m - 1]
    d1 = diag - w * (lam1 + 3 * par.mu1 * v1**2 + par.beta * v2**2)
    d2 = diag - w * (lam2 + 3 * par.mu2 * v2**2 + par.beta * v1**2)
    cross = -2 * par.beta * w * v1 * v2
    n = 2 * m
    ab = np.zeros((5, n))
    # ab[2 + i - j, j] = A[i, j]
    ab[2] = _interleave(d1, d2)
    sup1 = np.zeros(n)
    sup1[1::2] = cross          # A[2j, 2j+1]
    sub1 = np.zeros(n)
    sub1[0::2] = cross          # A[2j+1, 2j]
    ab[1, 1:] = sup1[1:]
    ab[3, :-1] = sub1[:-1]
    off2 = _interleave(off, off)
    ab[0, 2:] = off2            # A[i, i+2]
    ab[4, :-2] = off2           # A[i+2, i]
    return ab


def newton_polish(seed: StatePair, params: CouplingParams | None = None, *,
                  lam: tuple[float, float] | None = None, tol: float = 1e-12,
                  max_iter: int = 60, reject_liouville: bool = True,
                  method: str = "newton") -> SystemSolution:
    """Bordered Newton for the discrete system with both mass constraints.

    Unknowns are the interleaved free nodal values ``(u1_j, u2_j)`` and the
    multipliers. The pentadiagonal PDE block is factorised once per step and
    reused for the two border columns (a 2 x 2 Schur complement). The step
    is damped by backtracking on a merit function that combines the dual-norm
    PDE residuals with the relative mass defects. ``history`` holds the merit
    after every accepted step.

    Raises :class:`LiouvilleSuspect` when a multiplier is nonnegative at
    convergence (unless ``reject_liouville`` is False).
    """
    par = params or seed.params
    pair = seed.with_params(par)
    g = pair.grid
    m = g.n_points - 1
    w = g.weights[:m]
    targets = np.array([par.a1**2, par.a2**2])
    if lam is None:
        lam = multipliers(pair)
    lam = np.array(lam, dtype=float)
    v1 = pair.u1.values[:m].copy()
    v2 = pair.u2.values[:m].copy()
    sig = np.maximum(np.abs(lam), 1e-8 * max(abs(lam).max(), 1.0))

    def unpack(v1, v2):
        return StatePair(RadialField(g, np.append(v1, 0.0)), RadialField(g, np.append(v2, 0.0)), par)

    def residual(v1, v2, lam):
        r = system_residual(unpack(v1, v2), lam[0], lam[1])[:, :m]
        mres = np.array([np.dot(w, v1 * v1), np.dot(w, v2 * v2)]) - targets
        return r, mres

    def merit(r, mres, v1, v2, lam):
        tot = 0.0
        for i, v in enumerate((v1, v2)):
            ref = dual_norm(g, lam[i] * w * v, sig[i])
            tot += (dual_norm(g, r[i], sig[i]) / max(ref, 1e-300)) ** 2
        tot += float(np.sum((mres / targets) ** 2))
        return float(np.sqrt(tot))

    r, mres = residual(v1, v2, lam)
    phi = merit(r, mres, v1, v2, lam)
    history = [phi]
    for _ in range(max_iter):
        if phi < tol:
            break
        ab = _jacobian_bands(g, v1, v2, lam[0], lam[1], par)
        zeros = np.zeros(m)
        bcols = np.column_stack([_interleave(-w * v1, zeros), _interleave(zeros, -w * v2)])
        brows = np.column_stack([_interleave(2 * w * v1, zeros), _interleave(zeros, 2 * w * v2)])
        dx, dl = bordered_solve(ab, (2, 2), bcols, brows, -_interleave(r[0], r[1]), -mres)
        dv1, dv2 = dx[0::2], dx[1::2]
        t = 1.0
        while True:
            n1, n2, nl_ = v1 + t * dv1, v2 + t * dv2, lam + t * dl
            r_new, m_new = residual(n1, n2, nl_)
            phi_new = merit(r_new, m_new, n1, n2, nl_)
            if np.isfinite(phi_new) and phi_new <= (1 - 1e-4 * t) * phi:
                break
            t *= 0.5
            if t < 1e-8:
                break
        if t < 1e-8:
            if phi < 1e3 * tol:
                break
            raise Diverged(f"line search failed at merit {phi:.3e}")
        v1, v2, lam, r, mres, phi = n1, n2, nl_, r_new, m_new, phi_new
        history.append(phi)
        scale = max(np.abs(v1).max(), np.abs(v2).max())
        if max(np.abs(t * dv1).max(), np.abs(t * dv2).max()) <= 1e-14 * scale:
            break
    else:
        if phi > 1e3 * tol:
            raise Diverged(f"no convergence in {max_iter} Newton steps (merit {phi:.3e})")
    sol = make_system_solution(unpack(v1, v2), lam[0], lam[1], history, method)
    if reject_liouville and sol.liouville_suspect:
        raise LiouvilleSuspect(
            f"multipliers ({sol.lambda1:.4g}, {sol.lambda2:.4g}) not both negative", sol)
    return sol


def quadratic_convergence(history, window: int = 3) -> bool:
    """True if the last merit values contract at least superlinearly.

    Checks ``e_{k+1} <= C e_k^{1.5}`` with a generous constant over the last
    ``window`` iterates above the roundoff floor.
    """
    e = [h for h in history if h > 1e-13]
    if len(e) < 2:
        return True
    e = e[-window:]
    ratios = [e[i + 1] / e[i] ** 1.5 for i in range(len(e) - 1)]
    return bool(max(ratios) < 1e3)


# ----------------------------------------------------------------------------
# endpoints and the disjoint-support path
# ----------------------------------------------------------------------------


# Path nodes built from far annuli need dilations well beyond S_CAP to reach P.
PATH_S_CAP = 12.0


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    a = np.where(x > 0, np.exp(-1.0 / np.maximum(x, 1e-300)), 0.0)
    b = np.where(x < 1, np.exp(-1.0 / np.maximum(1 - x, 1e-300)), 0.0)
    return a / (a + b)


def annulus_bump(grid: RadialGrid, inner: float, outer: float, mass: float) -> RadialField:
    """Nonnegative C-infinity bump supported in ``inner < r < outer``, given mass."""
    r = grid.nodes
    mid, half = 0.5 * (inner + outer), 0.5 * (outer - inner)
    x = (r - mid) / half
    vals = np.zeros_like(r)
    inside = np.abs(x) < 1
    vals[inside] = np.exp(-1.0 / (1 - x[inside] ** 2))
    if not np.any(vals > 0):
        raise SupportOverlap(f"annulus ({inner:.3g}, {outer:.3g}) contains no grid node")
    return RadialField(grid, vals).normalized(mass)


def truncated_ground_state(grid: RadialGrid, a: float, mu: float, widths: float = 10.0
                           ) -> RadialField:
    """Ground state with a smooth cutoff at ``widths`` soliton lengths, on ``M``."""
    sc = scaling_constants(a, mu)
    c = sc["c"]
    q = soliton_record(3)
    r = grid.nodes
    cut = 1.0 - smooth_step((c * r - 0.7 * widths) / (0.3 * widths))
    vals = c / np.sqrt(mu) * q.profile(c * r) * cut
    vals[-1] = 0.0
    u = RadialField(grid, vals).normalized(a * a)
    u, _ = project_to_M(u, Nonlinearity.cubic(mu))
    return u


def support_radius(u: RadialField) -> float:
    nz = np.nonzero(u.values)[0]
    if len(nz) == 0:
        return 0.0
    return float(u.grid.nodes[min(nz[-1] + 1, u.grid.n_points - 1)])


def support_inner(u: RadialField) -> float:
    nz = np.nonzero(u.values)[0]
    return float(u.grid.nodes[max(nz[0] - 1, 0)])


def path_grid(params: CouplingParams, n_points: int = 3001, extent: float = 1500.0,
              core_resolution: float = 0.02) -> RadialGrid:
    """Graded grid for the endpoint path.

    Lengths are measured in ground-state widths ``1/c``. The first spacing
    is ``core_resolution`` widths of the narrower state and the radius is
    ``extent`` widths of the wider one, which leaves room for the dilated
    annuli.
    """
    cs = (scaling_constants(params.a1, params.mu1)["c"],
          scaling_constants(params.a2, params.mu2)["c"])
    r_max = extent / min(cs)
    h0 = core_resolution / max(cs)
    # sinh grading: h0 ~ r_max k / (sinh k (n - 1)); solve for k
    target = r_max / (h0 * (n_points - 1))
    lo, hi = 1e-6, 50.0
    for _ in range(200):
        k = 0.5 * (lo + hi)
        if k / np.sinh(k) * target > 1:
            lo = k
        else:
            hi = k
    return RadialGrid.graded(3, r_max, n_points, stretch=k)


@dataclass(frozen=True, eq=False)
class PathOnP:
    """Ordered nodes on the Pohozaev set joining two disjoint-support endpoints."""

    nodes: tuple
    ts: np.ndarray
    start: StatePair
    end: StatePair
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "ts", np.asarray(self.ts, dtype=float))

    def __len__(self):
        return len(self.nodes)

    @property
    def grid(self):
        return self.start.grid

    @property
    def params(self):
        return self.start.params

    def energies(self) -> np.ndarray:
        return np.array([energy_J(p) for p in self.nodes])

    def max_energy(self) -> float:
        return float(self.energies().max())

    def with_params(self, params: CouplingParams) -> "PathOnP":
        return PathOnP(tuple(p.with_params(params) for p in self.nodes), self.ts,
                       self.start.with_params(params), self.end.with_params(params), self.info)


def _interp_component(x: RadialField, y: RadialField, t: float, mass: float) -> RadialField:
    return x.with_values((1 - t) * x.values + t * y.values).normalized(mass)


def build_endpoints(params: CouplingParams, eps: float | None = None, *,
                    grid: RadialGrid | None = None, n_nodes: int = 33,
                    widths: float = 10.0, m_max: int = 8, s_cap: float = PATH_S_CAP):
    """Disjoint-support endpoints on the Pohozaev set and the path between them.

    The start pair is a truncated ground state of component 1 (projected to
    its scalar Pohozaev set) with an annulus in component 2 at inner radius
    ``2 e^m R``, where ``R`` is the support radius of the core and ``m`` is
    the smallest nonnegative integer for which ``J <= ell + eps`` after
    projection to ``P``. The end pair swaps the roles; its annulus also clears
    the start annulus so that ``u2 v1 = 0``. The path runs through the two
    renormalised linear interpolations, every node projected to ``P``.

    ``eps`` defaults to 5% of ``max(ell_1, ell_2)``. Returns
    ``(start, end, path)``; ``path.info`` records the achieved endpoint
    energies, the levels and the exponents ``m``.
    """
    if grid is None:
        grid = path_grid(params)
    ell1 = ground_state_level(params.a1, params.mu1)
    ell2 = ground_state_level(params.a2, params.mu2)
    ell = max(ell1, ell2)
    if eps is None:
        eps = 0.05 * ell
    if not eps > 0:
        raise ValueError("eps must be positive")
    a1s, a2s = params.a1**2, params.a2**2

    core1 = truncated_ground_state(grid, params.a1, params.mu1, widths)
    core2 = truncated_ground_state(grid, params.a2, params.mu2, widths)

    def endpoint(core, core_index, clear_radius):
        R = max(support_radius(core), clear_radius / 2)
        mass = a2s if core_index == 0 else a1s
        last = None
        for m in range(0, m_max + 1):
            inner, outer = 2 * R * np.exp(m), 3 * R * np.exp(m)
            if outer >= grid.r_max:
                break
            ann = annulus_bump(grid, inner, outer, mass)
            pair = StatePair(core, ann, params) if core_index == 0 else StatePair(ann, core, params)
            proj, s = project_to_P(pair, s_cap=s_cap)
            last = (proj, m, energy_J(proj))
            if energy_J(proj) <= ell + eps:
                return proj, m
        achieved = last[2] if last else np.inf
        raise EnergyBudgetExceeded(
            f"endpoint energy {achieved:.6g} above ell + eps = {ell + eps:.6g}",
            achieved=achieved, budget=ell + eps)

    start, m_u = endpoint(core1, 0, 0.0)
    end, m_v = endpoint(core2, 1, support_radius(start.u2) * 1.01)
    if np.any(start.u1.values * start.u2.values) or np.any(end.u1.values * end.u2.values) \
            or np.any(start.u2.values * end.u1.values):
        raise SupportOverlap("endpoint supports overlap on the grid")

    half = n_nodes // 2
    ts = np.linspace(0.0, 1.0, n_nodes)
    nodes = []
    for t in ts:
        if t <= 0.5:
            tau = 2 * t
            raw = StatePair(_interp_component(start.u1, end.u1, tau, a1s), start.u2, params)
        else:
            tau = 2 * t - 1
            raw = StatePair(end.u1, _interp_component(start.u2, end.u2, tau, a2s), params)
        if t == 0:
            nodes.append(start)
        elif t == 1:
            nodes.append(end)
        else:
            nodes.append(project_to_P(raw, s_cap=s_cap)[0])
    info = dict(ell1=ell1, ell2=ell2, eps=eps, m_start=m_u, m_end=m_v,
                J_start=energy_J(start), J_end=energy_J(end), mid_index=half)
    path = PathOnP(tuple(nodes), ts, start, end, info)
    info["C"] = path.max_energy()
    return start, end, path


# ----------------------------------------------------------------------------
# mountain pass on P
# ----------------------------------------------------------------------------


def _sigmas(pair: StatePair) -> np.ndarray:
    """Zeroth-order potentials of the descent metric, shape (2, n).

    ``|lambda_i|`` (floored by the kinetic scale) plus the repulsive coupling
    ``|beta| u_j^2``, which dominates the Hessian inside the other
    component's support when the components segregate.
    """
    lam = multipliers(pair)
    par = pair.params
    floor = np.array([pair.u1.grad_norm_sq / par.a1**2, pair.u2.grad_norm_sq / par.a2**2])
    base = np.maximum(np.abs(lam), floor)
    rep = max(-par.beta, 0.0)
    return np.stack([base[0] + rep * pair.u2.values**2, base[1] + rep * pair.u1.values**2])


def constrained_gradient(pair: StatePair, sigmas=None):
    """Preconditioned gradient of ``J`` tangent to both spheres and to ``P``.

    Returns ``(direction, slope, gnorm)``: the direction in nodal space,
    the directional derivative ``<J', direction>`` and the relative
    gradient norm (dual norm of ``J'`` restricted to the tangent space over
    the dual norm of the multiplier terms).
    """
    g = pair.grid
    sig = _sigmas(pair) if sigmas is None else np.asarray(sigmas)
    grad = system_gradient(pair)
    w = g.weights
    n1 = np.stack([w * pair.u1.values, np.zeros(g.n_points)])
    n2 = np.stack([np.zeros(g.n_points), w * pair.u2.values])
    n1[:, -1] = 0.0
    n2[:, -1] = 0.0
    normals = [n1, n2, pohozaev_gradient(pair)]
    d = tangent_projection(g, grad, normals, sig)
    slope = float(np.vdot(grad, d))
    lam = multipliers(pair)
    ref = np.stack([lam[0] * n1[0], lam[1] * n2[1]])
    zref = riesz(g, ref, sig)
    gnorm = np.sqrt(max(slope, 0.0)) / max(np.sqrt(float(np.vdot(ref, zref))), 1e-300)
    return d, slope, float(gnorm)


def retract(pair: StatePair, tol: float = 1e-10, s_cap: float = PATH_S_CAP) -> StatePair:
    """Back onto both spheres and ``P`` with nonnegative components."""
    q = pair.abs().normalized()
    return project_to_P(q, tol=tol, s_cap=s_cap)[0]


def _node_distance(p: StatePair, q: StatePair) -> float:
    par = p.params
    out = 0.0
    for x, y, a2 in ((p.u1, q.u1, par.a1**2), (p.u2, q.u2, par.a2**2)):
        d = x.with_values(x.values - y.values)
        k = 0.5 * (x.grad_norm_sq + y.grad_norm_sq)
        out += d.grad_norm_sq / k + d.mass / a2
    return float(np.sqrt(out))


def _mix(p: StatePair, q: StatePair, theta: float) -> StatePair:
    u1 = p.u1.with_values((1 - theta) * p.u1.values + theta * q.u1.values)
    u2 = p.u2.with_values((1 - theta) * p.u2.values + theta * q.u2.values)
    return StatePair(u1, u2, p.params)


def reparametrize(nodes, energies, weight: float = 3.0, tol: float = 1e-10, s_cap: float = PATH_S_CAP):
    """Respread interior nodes at equal energy-weighted arclength.

    Segment lengths are measured in a relative H^1 distance and multiplied by
    ``1 + weight (E - E_min)/(E_max - E_min)`` at the segment midpoint, so
    nodes gather near the top of the path. New nodes are renormalised linear
    mixtures of their neighbours, projected back to ``P``.
    """
    e = np.asarray(energies)
    span = max(e.max() - e.min(), 1e-300)
    seg = np.array([_node_distance(nodes[i], nodes[i + 1]) for i in range(len(nodes) - 1)])
    mid_e = 0.5 * (e[1:] + e[:-1])
    seg = seg * (1 + weight * (mid_e - e.min()) / span)
    s = np.concatenate(([0.0], np.cumsum(seg)))
    if s[-1] == 0:
        return list(nodes)
    s /= s[-1]
    targets = np.linspace(0, 1, len(nodes))
    out = [nodes[0]]
    for t in targets[1:-1]:
        k = int(np.clip(np.searchsorted(s, t, side="right") - 1, 0, len(nodes) - 2))
        theta = (t - s[k]) / max(s[k + 1] - s[k], 1e-300)
        if theta <= 1e-12:
            out.append(nodes[k])
        elif theta >= 1 - 1e-12:
            out.append(nodes[k + 1])
        else:
            near = nodes[k] if theta < 0.5 else nodes[k + 1]
            try:
                q = retract(_mix(nodes[k], nodes[k + 1], theta), tol=tol, s_cap=s_cap)
            except (NotInCone, NonConvergence, ValueError):
                q = near
            # a mixture far above both neighbours is a poor node; keep the old one
            if energy_J(q) > max(e[k], e[k + 1]) + 0.1 * span:
                q = near
            out.append(q)
    out.append(nodes[-1])
    return out


@dataclass
class MountainPassResult:
    solution: SystemSolution
    c: float
    discrete_max: float
    path: PathOnP
    iterations: int
    gnorm_history: list
    level_history: list
    accepted_level: bool
    torn: tuple = ()

    @property
    def margin(self) -> float:
        """``c - max(ell_1, ell_2)``."""
        p = self.solution.params
        return self.c - max(ground_state_level(p.a1, p.mu1), ground_state_level(p.a2, p.mu2))


def _densify(nodes, tol, s_cap):
    out = [nodes[0]]
    for p, q in zip(nodes[:-1], nodes[1:]):
        try:
            out.append(retract(_mix(p, q, 0.5), tol=tol, s_cap=s_cap))
        except (NotInCone, NonConvergence, ValueError):
            out.append(p)
        out.append(q)
    return out


def _segment_midpoints(nodes, tol, s_cap):
    """Retracted midpoints of adjacent nodes; ``None`` where the mixture leaves the cone."""
    out = []
    for p, q in zip(nodes[:-1], nodes[1:]):
        try:
            out.append(retract(_mix(p, q, 0.5), tol=tol, s_cap=s_cap))
        except (NotInCone, NonConvergence, ValueError, DilationOutOfRange):
            out.append(None)
    return out


def torn_segments(nodes, tol: float = 1e-10, s_cap: float = PATH_S_CAP) -> list[int]:
    """Indices ``k`` of segments ``(k, k+1)`` whose midpoint cannot be put on ``P``.

    A torn segment means the deformation has split the path into pieces that
    no longer bound a common mountain.
    """
    return [k for k, m in enumerate(_segment_midpoints(nodes, tol, s_cap)) if m is None]


def mountain_pass_on_P(path: PathOnP, params: CouplingParams | None = None, *,
                       mp_tol: float = 1e-2, step: float = 0.5, max_iter: int = 3000,
                       climb_after: int = 20, climb_gnorm: float = 0.05,
                       reparam_every: int = 5,
                       energy_weight: float = 3.0, patience: int = 200,
                       level_window: float = 0.05, max_densify: int = 2,
                       s_cap: float = PATH_S_CAP, proj_tol: float = 1e-10,
                       polish: bool = True, newton_tol: float = 1e-11
                       ) -> MountainPassResult:
    """Discrete path deformation for the mountain-pass level on ``P``.

    Interior nodes take damped steps along the preconditioned constrained
    gradient of :func:`constrained_gradient`, are pulled back by
    :func:`retract` (which also enforces nonnegativity) and are respread by
    :func:`reparametrize`. After ``climb_after`` sweeps the highest node
    climbs: its step has the component along the path tangent reversed.
    The sweep stops when the highest node's relative gradient is below
    ``mp_tol``; that node seeds :func:`newton_polish`. The polished level is
    accepted if it lies within ``level_window`` of the discrete maximum;
    otherwise the path is densified and the sweep resumed.
    """
    par = params or path.params
    nodes = [p.with_params(par) for p in path.nodes]
    if len(nodes) < 18:
        raise ValueError("need at least 16 interior nodes")
    g = nodes[0].grid
    gn_hist, lvl_hist = [], []
    best_level, best_gnorm, since_best = np.inf, np.inf, 0
    it = 0
    densified = 0
    while True:
        energies = [energy_J(p) for p in nodes]
        k_max = int(np.argmax(energies[1:-1])) + 1
        new_nodes = list(nodes)
        top_gnorm = None
        for k in range(1, len(nodes) - 1):
            p = nodes[k]
            d, slope, gnorm = constrained_gradient(p)
            climbing = k == k_max and it >= climb_after and gnorm < climb_gnorm
            if k == k_max:
                top_gnorm = gnorm
            if climbing:
                tang = np.stack([nodes[k + 1].u1.values - nodes[k - 1].u1.values,
                                 nodes[k + 1].u2.values - nodes[k - 1].u2.values])
                sig = _sigmas(p)
                bt = np.stack([g.stiffness_matvec(tang[i]) + sig[i] * g.weights * tang[i]
                               for i in range(2)])
                denom = float(np.vdot(tang, bt))
                if denom > 0:
                    d = d - 2 * float(np.vdot(d, bt)) / denom * tang
            t = step
            while True:
                trial = StatePair(p.u1.with_values(p.u1.values - t * d[0]),
                                  p.u2.with_values(p.u2.values - t * d[1]), par)
                try:
                    q = retract(trial, tol=proj_tol, s_cap=s_cap)
                    if climbing or energy_J(q) <= energies[k]:
                        break
                except (NonConvergence, NotInCone, ValueError):
                    pass
                t *= 0.5
                if t < 1e-6:
                    q = p
                    break
            new_nodes[k] = q
        nodes = new_nodes
        it += 1
        if it % reparam_every == 0:
            nodes = reparametrize(nodes, [energy_J(p) for p in nodes], energy_weight,
                                  tol=proj_tol, s_cap=s_cap)
        level = max(energy_J(p) for p in nodes[1:-1])
        gn_hist.append(top_gnorm)
        lvl_hist.append(level)
        log.debug("sweep %d level %.10g gnorm %.3e", it, level, top_gnorm)
        if top_gnorm < best_gnorm * (1 - 1e-3) or level < best_level * (1 - 1e-9):
            since_best = 0
        else:
            since_best += 1
        best_gnorm = min(best_gnorm, top_gnorm)
        best_level = min(best_level, level)

        converged = top_gnorm < mp_tol and it > climb_after
        if not converged:
            exc = None
            if since_best > patience:
                exc = StagnationError(
                    f"level {level:.8g} and gradient {top_gnorm:.2e} stalled for {patience} sweeps")
            elif it >= max_iter:
                exc = MaxIterations(f"mountain pass: {max_iter} sweeps, gradient {top_gnorm:.2e}")
            if exc is not None:
                # keep the deformed path for inspection or a restart
                exc.path = PathOnP(tuple(nodes), np.linspace(0, 1, len(nodes)), nodes[0],
                                   nodes[-1], dict(path.info))
                raise exc
            continue

        energies = [energy_J(p) for p in nodes]
        k_max = int(np.argmax(energies[1:-1])) + 1
        discrete_max = energies[k_max]
        out_path = PathOnP(tuple(nodes), np.linspace(0, 1, len(nodes)), nodes[0], nodes[-1],
                           dict(path.info))
        torn = tuple(torn_segments(nodes, proj_tol, s_cap))
        if torn:
            log.info("mountain pass: path torn at segments %s", torn)
        if not polish:
            top = nodes[k_max]
            lam = multipliers(top)
            sol = make_system_solution(top, lam[0], lam[1], method="mountain-pass")
            return MountainPassResult(sol, sol.energy, discrete_max, out_path, it,
                                      gn_hist, lvl_hist, True, torn)
        sol = newton_polish(nodes[k_max], par, tol=newton_tol, method="mountain-pass+newton")
        ok = abs(sol.energy - discrete_max) <= level_window * abs(discrete_max)
        if ok or densified >= max_densify:
            return MountainPassResult(sol, sol.energy, discrete_max, out_path, it,
                                      gn_hist, lvl_hist, ok, torn)
        densified += 1
        nodes = _densify(nodes, proj_tol, s_cap)
        best_level, best_gnorm, since_best = np.inf, np.inf, 0


# ----------------------------------------------------------------------------
# continuation in beta
# ----------------------------------------------------------------------------

DEFAULT_SCHEDULE = (-1.0, -2.0, -5.0, -10.0, -20.0, -50.0, -100.0, -200.0, -500.0, -1000.0)


def coexistence_grid(params: CouplingParams, n_points: int = 4001, extent: float = 30.0,
                     core_resolution: float = 0.02) -> RadialGrid:
    """Graded grid resolving both decoupled ground states.

    Same sizing rule as :func:`path_grid` with a much shorter reach, since
    nothing is moved far out.
    """
    return path_grid(params, n_points, extent, core_resolution)


PRODUCTION_POINTS = 400001
PRODUCTION_CORE = 6.25e-5


def production_grid(params: CouplingParams, n_points: int = PRODUCTION_POINTS,
                    core_resolution: float = PRODUCTION_CORE) -> RadialGrid:
    """Coexistence grid fine enough for ``|G|/K`` near 1e-8 at the narrower core.

    The Pohozaev residual of discrete solutions is O(h^2) in the core spacing.
    """
    return coexistence_grid(params, n_points, core_resolution=core_resolution)


def transfer(sol: SystemSolution, grid: RadialGrid, *, tol: float = 1e-11,
             reject_liouville: bool = True) -> SystemSolution:
    """Resample a solution onto ``grid`` and re-polish it there."""
    pair = StatePair(resample(sol.pair.u1, grid), resample(sol.pair.u2, grid), sol.params)
    return newton_polish(pair, lam=(sol.lambda1, sol.lambda2), tol=tol,
                         reject_liouville=reject_liouville, method=sol.method + "+transfer")


def decoupled_seed(params: CouplingParams, grid: RadialGrid | None = None) -> StatePair:
    """The two scalar ground states sampled on one grid, as a warm start."""
    from .scalar import ground_state_by_scaling
    grid = grid or coexistence_grid(params)
    return StatePair(ground_state_by_scaling(params.a1, params.mu1, grid).u,
                     ground_state_by_scaling(params.a2, params.mu2, grid).u, params)


def coexistence_state(params: CouplingParams, grid: RadialGrid | None = None, *,
                      tol: float = 1e-11, beta_step: float = -1.0,
                      reject_liouville: bool = True) -> SystemSolution:
    """Positive solution reached from the decoupled pair at ``beta = 0``.

    The coupling is switched on in steps of ``beta_step`` (halved on
    failure) up to ``params.beta``. Raises :class:`LiouvilleSuspect` if the
    branch ends with a multiplier ``>= 0`` unless ``reject_liouville`` is off.
    """
    seed = decoupled_seed(params.with_beta(0.0), grid)
    c1, c2 = (scaling_constants(params.a1, params.mu1), scaling_constants(params.a2, params.mu2))
    sol = newton_polish(seed, lam=(c1["lam"], c2["lam"]), tol=tol, reject_liouville=False)
    trace = continue_in_beta(sol, [0.0, params.beta], beta_step=beta_step, tol=tol)
    sol = trace.solutions[-1]
    if reject_liouville and sol.liouville_suspect:
        raise LiouvilleSuspect(f"lambda = ({sol.lambda1:.6g}, {sol.lambda2:.6g}) is not "
                               "negative at the end of the coupling branch", sol)
    return sol


def w_residual(sol: SystemSolution) -> float:
    """Relative residual of ``w = u1 - u2`` in the segregated limit equation.

    ``-Delta w - lam1 w+ + lam2 w- = mu1 (w+)^3 - mu2 (w-)^3``, in the dual
    norm of :func:`system_el_residual` with ``sigma = max |lam_i|``.
    """
    par = sol.params
    g = sol.grid
    w = sol.pair.u1.values - sol.pair.u2.values
    wp, wm = np.maximum(w, 0.0), np.maximum(-w, 0.0)
    src = sol.lambda1 * wp - sol.lambda2 * wm + par.mu1 * wp**3 - par.mu2 * wm**3
    sigma = max(abs(sol.lambda1), abs(sol.lambda2))
    scale = dual_norm(g, sigma * g.weights * w, sigma)
    return dual_norm(g, g.stiffness_matvec(w) - g.weights * src, sigma) / max(scale, 1e-300)


@dataclass(frozen=True)
class TraceRow:
    beta: float
    c: float
    lambda1: float
    lambda2: float
    overlap: float
    lipschitz: float
    w_residual: float
    el_residual: float
    G_residual: float
    mass_error: float
    bisections: int

    @classmethod
    def from_solution(cls, sol: SystemSolution, bisections: int = 0) -> "TraceRow":
        return cls(sol.params.beta, sol.energy, sol.lambda1, sol.lambda2, sol.overlap,
                   max(sol.pair.u1.max_slope(), sol.pair.u2.max_slope()), w_residual(sol),
                   sol.el_residual, sol.G_residual, sol.mass_error, bisections)


COLUMNS = tuple(TraceRow.__dataclass_fields__)


@dataclass
class ContinuationTrace:
    """Solutions and their segregation metrics at the scheduled couplings."""

    rows: list = field(default_factory=list)
    solutions: list = field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.rows)

    def append(self, sol: SystemSolution, bisections: int = 0):
        self.rows.append(TraceRow.from_solution(sol, bisections))
        self.solutions.append(sol)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    @property
    def betas(self) -> np.ndarray:
        return self.column("beta")

    @property
    def overlaps(self) -> np.ndarray:
        return self.column("overlap")

    def table(self) -> np.ndarray:
        return np.array([[float(getattr(r, c)) for c in COLUMNS] for r in self.rows])


def continue_in_beta(start: SystemSolution, beta_schedule=DEFAULT_SCHEDULE, *,
                     beta_step: float | None = None, beta_step_min: float = 1e-4,
                     tol: float = 1e-11, max_iter: int = 40) -> ContinuationTrace:
    """Natural-parameter continuation along a decreasing coupling schedule.

    Each scheduled value is reached from the previous one by warm-started
    :func:`newton_polish` steps. A failed step is halved; a successful one
    doubles the next step, capped by ``beta_step`` when given. Only the
    scheduled values enter the trace. Multipliers are recorded as they come
    out, nonnegative or not.
    """
    sched = [float(b) for b in beta_schedule]
    if len(sched) < 1 or np.any(np.diff(sched) >= 0):
        raise ValueError("beta_schedule must be strictly decreasing")
    if not np.isclose(sched[0], start.params.beta, rtol=1e-12, atol=1e-12):
        raise ValueError(f"schedule starts at {sched[0]:g}, the start solution has "
                         f"beta = {start.params.beta:g}")
    trace = ContinuationTrace()
    trace.append(start)
    sol = start
    beta = sched[0]
    step = beta_step if beta_step is not None else sched[1] - sched[0] if len(sched) > 1 else -1.0
    for target in sched[1:]:
        halvings = 0
        while beta > target:
            trial = max(beta + step, target)
            if beta_step is not None:
                trial = max(trial, beta + beta_step)
            try:
                new = newton_polish(sol.pair, sol.params.with_beta(trial),
                                    lam=(sol.lambda1, sol.lambda2), tol=tol,
                                    max_iter=max_iter, reject_liouville=False,
                                    method="continuation")
            except (NonConvergence, SingularJacobian, Diverged, MaxIterations) as exc:
                step /= 2
                halvings += 1
                if abs(step) < beta_step_min:
                    raise ContinuationStalled(
                        f"step below {beta_step_min:g} at beta = {beta:.6g}: {exc}",
                        trace=trace) from exc
                continue
            sol, beta = new, trial
            step *= 2
        log.info("beta %.6g c %.10g overlap %.3e", beta, sol.energy, sol.overlap)
        trace.append(sol, halvings)
    return trace
