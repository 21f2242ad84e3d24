"""Certificates: numerical checks of the identities and bounds solutions obey.

Every check returns a :class:`CheckEntry` holding the measured value, the
threshold it is compared with and the verdict. Checks are pure functions of
their inputs. A :class:`Certificate` bundles entries with provenance and
serialises to plain dicts.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import least_squares

from .errors import ExponentOutOfRange, TailUnderflow
from .functionals import StatePair, constraint_G, critical_exponent, scalar_constraint_G
from .grid import RadialField
from .scalar import ScalarSolution, soliton_record
from .system import ContinuationTrace, SystemSolution

RES_TOL = 1e-8
MASS_TOL = 1e-8


@dataclass(frozen=True)
class CheckEntry:
    name: str
    value: float
    threshold: float | None
    passed: bool
    relation: str = "<="
    info: dict = field(default_factory=dict)

    def line(self) -> str:
        """One machine-parsable line: ``name=... value=... threshold=... status=...``."""
        thr = "none" if self.threshold is None else f"{self.threshold:.6g}"
        status = "PASS" if self.passed else "FAIL"
        if self.info.get("vacuous"):
            status = "PASS-vacuous"
        elif self.relation == "info":
            status = "INFO"
        return f"check={self.name} value={self.value:.6g} threshold={thr} status={status}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["value"] = _plain(self.value)
        d["info"] = {k: _plain(v) for k, v in self.info.items()}
        return d


def _plain(x):
    if isinstance(x, (np.floating, np.integer)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_plain(v) for v in x]
    return x


def _entry(name, value, threshold, relation="<=", **info) -> CheckEntry:
    value = float(value)
    if relation == "<=":
        ok = value <= threshold
    elif relation == "<":
        ok = value < threshold
    elif relation == ">=":
        ok = value >= threshold
    elif relation == ">":
        ok = value > threshold
    else:
        raise ValueError(f"unknown relation {relation!r}")
    return CheckEntry(name, value, float(threshold), bool(ok), relation, info)


@dataclass
class Certificate:
    checks: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def add(self, entry: CheckEntry) -> "Certificate":
        self.checks.append(entry)
        return self

    def extend(self, entries) -> "Certificate":
        self.checks.extend(entries)
        return self

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> CheckEntry:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return dict(passed=self.passed, provenance={k: _plain(v) for k, v in self.provenance.items()},
                    checks=[c.to_dict() for c in self.checks])


def grid_provenance(grid, method: str = "") -> dict:
    return dict(solver=method, dimension=grid.dimension, r_max=grid.r_max,
                n_points=grid.n_points, h_min=float(grid.spacing.min()), h_max=grid.h)


# ----------------------------------------------------------------------------
# solution checks
# ----------------------------------------------------------------------------


def pohozaev_value(obj) -> float:
    """``|G| / int |grad u|^2`` for a scalar or system solution, or a bare pair."""
    if isinstance(obj, SystemSolution):
        obj = obj.pair
    if isinstance(obj, StatePair):
        return abs(constraint_G(obj)) / obj.kinetic
    if isinstance(obj, ScalarSolution):
        return abs(scalar_constraint_G(obj.u, obj.nonlinearity)) / obj.u.grad_norm_sq
    raise TypeError(f"cannot certify {type(obj).__name__}")


def check_pohozaev(sol, tol: float = RES_TOL) -> CheckEntry:
    """Solutions lie on the Pohozaev set: ``|G|/K <= tol``."""
    return _entry("pohozaev", pohozaev_value(sol), tol)


def check_mass(sol, tol: float = MASS_TOL) -> CheckEntry:
    """Largest relative mass defect."""
    if isinstance(sol, SystemSolution):
        p = sol.pair
        err = max(abs(p.u1.mass / p.params.a1**2 - 1), abs(p.u2.mass / p.params.a2**2 - 1))
    else:
        err = abs(sol.u.mass / sol.a**2 - 1)
    return _entry("mass", err, tol)


def check_el_residual(sol, tol: float = RES_TOL) -> CheckEntry:
    return _entry("el_residual", sol.el_residual, tol)


def check_multiplier_signs(sol) -> CheckEntry:
    """Both multipliers negative; a nonnegative one marks a Liouville suspect."""
    if isinstance(sol, SystemSolution):
        top = max(sol.lambda1, sol.lambda2)
        return _entry("multiplier_sign", top, 0.0, "<", lambda1=sol.lambda1,
                      lambda2=sol.lambda2, liouville_suspect=bool(top >= 0))
    return _entry("multiplier_sign", sol.lam, 0.0, "<")


def check_positivity(sol: SystemSolution, tol: float = 1e-8) -> CheckEntry:
    """``min u_i >= -tol sup u_i``, recorded as ``-min_i (min u_i / sup u_i)``."""
    return _entry("positivity", -sol.min_ratio(), tol)


# ----------------------------------------------------------------------------
# Gagliardo-Nirenberg
# ----------------------------------------------------------------------------


def gn_exponent(dimension: int, r_exp: float) -> float:
    """``gamma = N (1/2 - 1/r)``; raises for ``r`` outside ``(2, 2N/(N-2))``."""
    upper = critical_exponent(dimension)
    if not 2 < r_exp < upper:
        raise ExponentOutOfRange(f"r = {r_exp} outside (2, {upper:g}) for N = {dimension}")
    return dimension * (0.5 - 1.0 / r_exp)


def gn_ratio(u: RadialField, r_exp: float) -> float:
    """``|u|_r / (|u|_2^(1-gamma) |grad u|_2^gamma)`` by grid quadrature."""
    gam = gn_exponent(u.grid.dimension, r_exp)
    num = u.power_integral(r_exp) ** (1.0 / r_exp)
    return num / (u.mass ** ((1 - gam) / 2) * u.grad_norm_sq ** (gam / 2))


@lru_cache(maxsize=None)
def sharp_gn_ratio(dimension: int = 3, r_exp: float = 4.0) -> float:
    """The ratio of the canonical soliton for ``-Q'' + Q = Q^(r-1)``, from its shot profile.

    The soliton is the extremal of the inequality, so this is the sharp value.
    Available for the mass-supercritical range ``r > 2 + 4/N`` covered by
    the shooting solver; below it pass an explicit ``bound``.
    """
    gam = gn_exponent(dimension, r_exp)
    q = soliton_record(dimension, exponent=r_exp)
    return q.power_integral ** (1 / r_exp) / (q.mass ** ((1 - gam) / 2) * q.kinetic ** (gam / 2))


def check_gagliardo_nirenberg(u: RadialField, r_exp: float = 4.0, *, bound: float | None = None,
                              slack: float = 1e-4) -> CheckEntry:
    """Ratio bounded by the sharp value times ``1 + slack``."""
    val = gn_ratio(u, r_exp)
    sharp = sharp_gn_ratio(u.grid.dimension, float(r_exp)) if bound is None else bound
    return _entry("gagliardo_nirenberg", val, sharp * (1 + slack), sharp=sharp, r_exp=r_exp)


# ----------------------------------------------------------------------------
# decay
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    gamma: float
    alpha: float
    window: tuple
    points: int


def fit_decay(u: RadialField, *, window: float = 0.5, noise: float = 1e-12,
              boundary_band: float = 0.05, min_points: int = 8) -> DecayFit:
    """Fit ``log(r u) = log alpha - sqrt(1 + gamma r^2)`` on ``[window R_tail, R_tail]``.

    ``R_tail`` is the last radius where ``|u|`` exceeds ``noise sup|u|``,
    kept out of the outer ``boundary_band`` next to the Dirichlet node. The
    factor ``r`` removes the algebraic part of the radial Green's function in
    R^3, so ``gamma`` estimates the exponential rate squared.
    """
    r, v = u.r, u.values
    peak = u.sup()
    floor = noise * peak
    live = np.nonzero((np.abs(v) > floor) & (r < (1 - boundary_band) * u.grid.r_max))[0]
    if peak == 0 or live.size == 0:
        raise TailUnderflow("field is below the noise floor everywhere")
    r_tail = r[live[-1]]
    m = (r >= window * r_tail) & (r <= r_tail) & (v > floor)
    if np.count_nonzero(m) < min_points:
        raise TailUnderflow(f"only {np.count_nonzero(m)} live points in the decay window")
    x = r[m]
    y = np.log(v[m] * x) if u.grid.dimension == 3 else np.log(v[m])
    slope = max(-(y[-1] - y[0]) / (x[-1] - x[0]), 1e-12)

    def res(p):
        return p[0] - np.sqrt(1 + np.exp(p[1]) * x * x) - y

    sol = least_squares(res, [y[0] + slope * x[0], 2 * np.log(slope)])
    return DecayFit(float(np.exp(sol.x[1])), float(np.exp(sol.x[0])),
                    (float(x[0]), float(x[-1])), int(x.size))


def check_decay(u: RadialField, lam: float, *, gamma_frac: float = 0.5, **fit_kw) -> CheckEntry:
    """Exponential decay at least as fast as the bound with ``gamma = gamma_frac |lam|``.

    The recorded value is ``gamma_fit / |lam|``, which tends to 1 for
    solutions. A tail lost in rounding yields a vacuous PASS.
    """
    if not lam < 0:
        return CheckEntry("decay", float("nan"), gamma_frac, False, ">=",
                          dict(reason="multiplier is not negative"))
    try:
        fit = fit_decay(u, **fit_kw)
    except TailUnderflow as exc:
        return CheckEntry("decay", float("nan"), gamma_frac, True, ">=",
                          dict(vacuous=True, reason=str(exc)))
    return _entry("decay", fit.gamma / abs(lam), gamma_frac, ">=", gamma=fit.gamma,
                  alpha=fit.alpha, window=fit.window, points=fit.points)


# ----------------------------------------------------------------------------
# gradient check
# ----------------------------------------------------------------------------


def _smooth_directions(rng, base: np.ndarray, r: np.ndarray, modes: int = 6) -> np.ndarray:
    """Random combination of ``base * cos(k pi r / R)``, ``R`` the live extent of ``base``."""
    live = np.nonzero(np.abs(base) > 1e-12 * np.abs(base).max())[0]
    R = r[live[-1]] if live.size else r[-1]
    k = np.arange(modes)[:, None]
    basis = base * np.cos(np.pi * k * np.minimum(r / R, 1.0))
    return rng.standard_normal(modes) @ basis


def _tangent(v: np.ndarray, normals: list, weights: np.ndarray) -> np.ndarray:
    """Remove from ``v`` the L2 representatives ``n / w`` of the dual normals."""
    reps = [n / weights for n in normals]
    gram = np.array([[np.vdot(a, b) for b in reps] for a in normals])
    coef = np.linalg.solve(gram, np.array([np.vdot(a, v) for a in normals]))
    return v - sum(c * b for c, b in zip(coef, reps))


def gradient_check(state, nonlinearity=None, *, n_dirs: int = 40, h: float = 1e-5,
                   rel_tol: float = 1e-4, perturb: float = 1e-2, seed: int = 0) -> CheckEntry:
    """Analytic gradient against central differences along random tangent directions.

    ``state`` is a :class:`StatePair` (energy ``J``) or a field with its
    nonlinearity (energy ``I``). The check runs at a random smooth
    perturbation of ``state``, because at a constrained critical point every
    tangent derivative vanishes and the relative error carries no
    information. Directions are tangent to the mass spheres and to the
    Pohozaev set at the perturbed point; each is scaled to the norm of the
    state, so ``h`` is a relative step.
    """
    from .functionals import (energy_J, pohozaev_gradient, scalar_energy_I, scalar_gradient,
                              system_gradient)
    from .scalar import scalar_pohozaev_gradient

    rng = np.random.default_rng(seed)
    if isinstance(state, StatePair):
        g = state.grid
        r, w = g.nodes, g.weights
        base = np.stack([state.u1.values, state.u2.values])
        pert = np.stack([_smooth_directions(rng, b, r) for b in base])
        pert[:, -1] = 0.0
        x = base + perturb * pert * np.linalg.norm(base) / max(np.linalg.norm(pert), 1e-300)
        pt = StatePair(g.field(x[0]), g.field(x[1]), state.params)

        def energy(y):
            return energy_J(StatePair(g.field(y[0]), g.field(y[1]), state.params))

        grad = system_gradient(pt)
        z = np.zeros_like(x[0])
        normals = [np.stack([w * x[0], z]), np.stack([z, w * x[1]]), pohozaev_gradient(pt)]
        ww = np.stack([w, w])
    else:
        if nonlinearity is None:
            raise ValueError("a scalar field needs its nonlinearity")
        g = state.grid
        r, w = g.nodes, g.weights
        base = state.values[None, :]
        pert = _smooth_directions(rng, base[0], r)[None, :]
        pert[:, -1] = 0.0
        x = base + perturb * pert * np.linalg.norm(base) / max(np.linalg.norm(pert), 1e-300)
        pt = g.field(x[0])

        def energy(y):
            return scalar_energy_I(g.field(y[0]), nonlinearity)

        grad = scalar_gradient(pt, nonlinearity)[None, :]
        normals = [(w * x[0])[None, :], scalar_pohozaev_gradient(pt, nonlinearity)[None, :]]
        ww = w[None, :]
    for nv in normals:
        nv[:, -1] = 0.0
    errs = []
    scale = np.linalg.norm(x)
    for _ in range(n_dirs):
        v = np.stack([_smooth_directions(rng, b, r) for b in x])
        v[:, -1] = 0.0
        v = _tangent(v, normals, ww)
        v[:, -1] = 0.0
        v *= scale / np.linalg.norm(v)
        fd = (energy(x + h * v) - energy(x - h * v)) / (2 * h)
        an = float(np.vdot(grad, v))
        errs.append(abs(fd - an) / max(abs(an), abs(fd), 1e-300))
    return _entry("gradient", max(errs), rel_tol, directions=n_dirs, h=h, seed=seed)


# ----------------------------------------------------------------------------
# segregation along a trace
# ----------------------------------------------------------------------------


def holder_quotient(u: RadialField, alpha: float = 0.5, levels: int = 12) -> float:
    """Largest ``|u(x + d) - u(x)| / d^alpha`` over dyadic ``d = r_max 2^-k``."""
    r, v = u.r, u.values
    best = 0.0
    for k in range(1, levels + 1):
        d = u.grid.r_max * 2.0**-k
        x = r[r + d <= u.grid.r_max]
        if x.size == 0:
            continue
        diff = np.abs(np.interp(x + d, r, v) - np.interp(x, r, v))
        best = max(best, float(diff.max() / d**alpha))
    return best


def _informational(e: CheckEntry) -> CheckEntry:
    return CheckEntry(e.name, e.value, e.threshold, True, "info", dict(e.info, strict_pass=e.passed))


def check_segregation(trace: ContinuationTrace, *, res_tol: float = RES_TOL,
                      ratio_tol: float = 0.05, lipschitz_factor: float = 2.0,
                      holder_alpha: float = 0.5, strict_limit: bool = True) -> list:
    """Overlap decay, Lipschitz bound and the limit-equation residual along a trace.

    With ``strict_limit`` False the two limit-residual entries are recorded
    as informational: at finite coupling the interface layer keeps the
    residual of ``w`` well above solver tolerance.
    """
    if len(trace) < 4:
        raise ValueError("need at least 4 coupling values")
    q = trace.overlaps
    lip = trace.column("lipschitz")
    wres = trace.column("w_residual")
    increases = np.maximum(np.diff(q), 0.0)
    entries = [
        _entry("overlap_monotone", float(increases.max() / q[0]), 0.0,
               sequence=q.tolist()),
        _entry("overlap_ratio", q[-1] / q[0], ratio_tol, "<"),
        _entry("lipschitz_bounded", lip.max() / lip[0], lipschitz_factor,
               sequence=lip.tolist()),
        _entry("w_residual", wres[-1], 10 * res_tol, sequence=wres.tolist()),
        _entry("w_residual_trend", float(np.count_nonzero(np.diff(wres) > 0)),
               0.0, sequence=wres.tolist()),
    ]
    if not strict_limit:
        entries[3:5] = [_informational(e) for e in entries[3:5]]
    last = trace.solutions[-1]
    hq = max(holder_quotient(last.pair.u1, holder_alpha), holder_quotient(last.pair.u2, holder_alpha))
    entries.append(CheckEntry("holder_quotient", hq, None, True, "info", dict(alpha=holder_alpha)))
    return entries


# ----------------------------------------------------------------------------
# bundles
# ----------------------------------------------------------------------------


def certify(sol, *, res_tol: float = RES_TOL, mass_tol: float = MASS_TOL,
            decay: bool = True) -> Certificate:
    """The standard battery for a scalar or system solution."""
    cert = Certificate(provenance=grid_provenance(sol.grid if isinstance(sol, SystemSolution)
                                                  else sol.u.grid, sol.method))
    cert.add(check_pohozaev(sol, res_tol)).add(check_mass(sol, mass_tol))
    cert.add(check_el_residual(sol, res_tol)).add(check_multiplier_signs(sol))
    if isinstance(sol, SystemSolution):
        cert.add(check_positivity(sol))
        if decay:
            for i, (u, lam) in enumerate(((sol.pair.u1, sol.lambda1), (sol.pair.u2, sol.lambda2)), 1):
                e = check_decay(u, lam)
                cert.add(CheckEntry(f"decay_u{i}", e.value, e.threshold, e.passed, e.relation, e.info))
    elif decay and sol.node_count == 0:
        cert.add(check_decay(sol.u, sol.lam))
    return cert


def certify_trace(trace: ContinuationTrace, *, res_tol: float = RES_TOL, C: float | None = None,
                  strict_limit: bool = True) -> Certificate:
    """Segregation checks plus the uniform level bound ``c_beta <= C`` when ``C`` is given."""
    s0 = trace.solutions[0]
    cert = Certificate(provenance=grid_provenance(s0.grid, "continuation"))
    cert.extend(check_segregation(trace, res_tol=res_tol, strict_limit=strict_limit))
    if C is not None:
        cert.add(_entry("level_bound", float(trace.column("c").max()), C))
    signs = trace.column("lambda1").max(), trace.column("lambda2").max()
    cert.add(_entry("multiplier_sign", max(signs), 0.0, "<"))
    return cert
