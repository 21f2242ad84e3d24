"""Command-line front end.

    normsol <verb> --config run.ini [--out DIR] [--seed FIELDS] [--resolution-sweep K]

Verbs are ``solve-scalar``, ``solve-system``, ``mountain-pass``,
``continue-beta`` and ``verify``. A run writes ``result.json`` (config echo,
solution summary, certificates), the solved fields and, for traces, a
plot-ready table. Exit status: 0 all checks pass, 1 configuration error,
2 solver failure, 3 a certificate check failed. Every failure prints one
``key=value`` line to stderr.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import io
from .errors import NormsolError
from .functionals import CouplingParams, Nonlinearity, multipliers, scalar_gradient
from .grid import RadialGrid, resample
from .scalar import (ScalarSolution, excited_state_by_nodes, make_solution,
                     newton_polish_scalar)
from .system import (DEFAULT_SCHEDULE, PRODUCTION_CORE, PRODUCTION_POINTS, build_endpoints,
                     coexistence_state, continue_in_beta, make_system_solution,
                     mountain_pass_on_P, newton_polish, path_grid, production_grid, transfer)

MODES = ("solve-scalar", "solve-system", "mountain-pass", "continue-beta", "verify")
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CERT = 0, 1, 2, 3
TOLERANCES = dict(mass_tol=1e-8, res_tol=1e-8, proj_tol=1e-10, grad_tol=1e-6, mp_tol=1e-2)

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str
    dimension: int = 3
    r_max: float | None = None
    n_points: int | None = None
    core_resolution: float = PRODUCTION_CORE
    physics: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=lambda: dict(TOLERANCES))
    seeds: dict = field(default_factory=dict)
    output: str = "out"
    rng_seed: int = 0
    mountain_pass: dict = field(default_factory=dict)
    strict_limit: bool = False
    echo: dict = field(default_factory=dict)

    # -- physics accessors --------------------------------------------------

    def coupling(self, beta: float | None = None) -> CouplingParams:
        p = self.physics
        b = p["beta"] if beta is None else beta
        return CouplingParams(p["mu1"], p["mu2"], b, p["a1"], p["a2"])

    def nonlinearity(self) -> Nonlinearity:
        p = self.physics
        if "terms" in p:
            return Nonlinearity(tuple(p["terms"]), self.dimension)
        return Nonlinearity.cubic(p.get("mu", 1.0), self.dimension)

    @property
    def schedule(self) -> tuple:
        return tuple(self.physics.get("beta_schedule", DEFAULT_SCHEDULE))


# ----------------------------------------------------------------------------
# parsing
# ----------------------------------------------------------------------------

_SYSTEM_KEYS = ("a1", "a2", "mu1", "mu2")


def _float(sec, key, default=None):
    try:
        return sec.getfloat(key, fallback=default)
    except ValueError as exc:
        raise ConfigError(f"{sec.name}.{key}: {exc}") from exc


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def parse_terms(text: str) -> list:
    """``"1:4, 0.5:5"`` -> ``[(1.0, 4.0), (0.5, 5.0)]`` (coefficient:exponent)."""
    out = []
    for item in text.split(","):
        c, sep, p = item.strip().partition(":")
        if not sep:
            raise ConfigError(f"nonlinearity term {item.strip()!r} is not coefficient:exponent")
        try:
            out.append((float(c), float(p)))
        except ValueError as exc:
            raise ConfigError(f"bad nonlinearity term {item.strip()!r}") from exc
    return out


def load_config(path, mode: str | None = None) -> RunConfig:
    """Read and validate an INI-style run file; ``mode`` (the CLI verb) wins over ``[run] mode``."""
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}".replace("\n", " ")) from exc
    return config_from_parser(cp, mode)


def config_from_parser(cp: configparser.ConfigParser, mode: str | None = None) -> RunConfig:
    for name in ("run", "grid", "physics", "tolerances", "seeds", "output", "mountain_pass",
                 "segregation"):
        if not cp.has_section(name):
            cp.add_section(name)
    run = cp["run"]
    file_mode = run.get("mode")
    if mode and file_mode and file_mode != mode:
        raise ConfigError(f"config mode {file_mode!r} does not match verb {mode!r}")
    mode = mode or file_mode
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {mode!r}")
    try:
        rng_seed = run.getint("seed", fallback=0)
        gsec = cp["grid"]
        dim = gsec.getint("dimension", fallback=3)
        n_points = gsec.getint("n_points", fallback=None)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    cfg = RunConfig(mode=mode, dimension=dim, rng_seed=rng_seed, n_points=n_points,
                    r_max=_float(gsec, "r_max"),
                    core_resolution=_float(gsec, "core_resolution", PRODUCTION_CORE))

    ph = cp["physics"]
    physics = {}
    for key in ("a", "mu", "a1", "a2", "mu1", "mu2", "beta"):
        if key in ph:
            physics[key] = _float(ph, key)
    if "nodes" in ph:
        try:
            physics["nodes"] = ph.getint("nodes")
        except ValueError as exc:
            raise ConfigError(f"physics.nodes: {exc}") from exc
    if "terms" in ph:
        physics["terms"] = parse_terms(ph["terms"])
    if "beta_schedule" in ph:
        physics["beta_schedule"] = _floats(ph["beta_schedule"])
    cfg.physics = physics

    tol = dict(TOLERANCES)
    for key in tol:
        tol[key] = _float(cp["tolerances"], key, tol[key])
    cfg.tolerances = tol
    mp = {}
    for key in ("eps", "mp_tol"):
        if key in cp["mountain_pass"]:
            mp[key] = _float(cp["mountain_pass"], key)
    for key in ("n_nodes", "path_points", "max_iter"):
        if key in cp["mountain_pass"]:
            try:
                mp[key] = cp["mountain_pass"].getint(key)
            except ValueError as exc:
                raise ConfigError(f"mountain_pass.{key}: {exc}") from exc
    cfg.mountain_pass = mp
    try:
        cfg.strict_limit = cp["segregation"].getboolean("strict_limit", fallback=False)
    except ValueError as exc:
        raise ConfigError(f"segregation.strict_limit: {exc}") from exc
    cfg.seeds = dict(cp["seeds"])
    cfg.output = cp["output"].get("directory", "out")
    cfg.echo = {s: dict(cp[s]) for s in cp.sections() if len(cp[s])}
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> RunConfig:
    bad = [k for k, v in cfg.tolerances.items() if not v > 0]
    if bad:
        raise ConfigError(f"tolerances must be positive: {', '.join(bad)}")
    if cfg.dimension < 2:
        raise ConfigError("grid.dimension must be at least 2")
    if cfg.n_points is not None and cfg.n_points < 3:
        raise ConfigError("grid.n_points must be at least 3")
    ph = cfg.physics
    if cfg.mode == "solve-scalar":
        if "a" not in ph:
            raise ConfigError("missing physics.a")
        if ph["a"] <= 0:
            raise ConfigError("physics.a must be positive")
        try:
            cfg.nonlinearity()
        except ValueError as exc:
            raise ConfigError(f"physics.terms: {exc}") from exc
    elif cfg.mode in ("solve-system", "mountain-pass", "continue-beta"):
        missing = [k for k in _SYSTEM_KEYS if k not in ph]
        if cfg.mode != "continue-beta" and "beta" not in ph:
            missing.append("beta")
        if missing:
            raise ConfigError(f"missing physics.{', physics.'.join(missing)}")
        if any(ph[k] <= 0 for k in _SYSTEM_KEYS):
            raise ConfigError("masses and self-couplings must be positive")
        if cfg.dimension != 3:
            raise ConfigError("the coupled system is solved in dimension 3 only")
        if cfg.mode == "continue-beta":
            sched = cfg.schedule
            if len(sched) < 2 or np.any(np.diff(sched) >= 0):
                raise ConfigError("physics.beta_schedule must be strictly decreasing")
            if "beta" in ph and ph["beta"] != sched[0]:
                raise ConfigError("physics.beta must equal the first scheduled value")
            ph.setdefault("beta", sched[0])
    return cfg


# ----------------------------------------------------------------------------
# runs
# ----------------------------------------------------------------------------


def threads() -> int:
    """Worker cap from the ``THREADS`` environment variable (default: CPU count)."""
    try:
        n = int(os.environ.get("THREADS", "0"))
    except ValueError:
        n = 0
    return max(1, n or (os.cpu_count() or 1))


@dataclass
class Outcome:
    summary: dict
    certificates: dict
    files: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def failures(self) -> list:
        return [(name, c) for name, cert in self.certificates.items() for c in cert.failures()]


def _seed_path(cfg: RunConfig, seed: str | None):
    return seed or cfg.seeds.get("fields")


def _sweep(sol, k: int, refine):
    """``k`` successive grid halvings; the Pohozaev ratio should drop about 4x each time."""
    rows = [dict(n_points=sol_grid(sol).n_points, pohozaev=dg.pohozaev_value(sol),
                 energy=sol.energy)]
    for _ in range(k):
        sol = refine(sol, sol_grid(sol).refined(2))
        rows.append(dict(n_points=sol_grid(sol).n_points, pohozaev=dg.pohozaev_value(sol),
                         energy=sol.energy))
    for a, b in zip(rows[:-1], rows[1:]):
        b["ratio"] = a["pohozaev"] / b["pohozaev"] if b["pohozaev"] > 0 else float("inf")
    return rows


def sol_grid(sol) -> RadialGrid:
    return sol.u.grid if isinstance(sol, ScalarSolution) else sol.grid


def run_solve_scalar(cfg: RunConfig, out: Path, seed=None, sweep=0) -> Outcome:
    nl = cfg.nonlinearity()
    a = cfg.physics["a"]
    tol = cfg.tolerances
    path = _seed_path(cfg, seed)
    if path:
        u = io.read_scalar(path)
        sol = newton_polish_scalar(u, nl, a, method="seeded-newton")
    else:
        grid = None
        if cfg.r_max is not None or cfg.n_points is not None:
            grid = RadialGrid.uniform(cfg.dimension, cfg.r_max or 30.0, cfg.n_points or 40001)
        sol = excited_state_by_nodes(a, nl, cfg.physics.get("nodes", 0),
                                     pohozaev_target=0.2 * tol["res_tol"], grid=grid)
    cert = dg.certify(sol, res_tol=tol["res_tol"], mass_tol=tol["mass_tol"])
    files = [io.export_fields(sol, out / "fields.txt")]
    extra = {}
    if sweep:
        extra["resolution_sweep"] = _sweep(
            sol, sweep, lambda s, g: newton_polish_scalar(resample(s.u, g), nl, a, lam=s.lam))
    return Outcome(sol.summary(), {"solution": cert}, files, extra)


def _system_refine(sol, grid):
    return transfer(sol, grid)


def run_solve_system(cfg: RunConfig, out: Path, seed=None, sweep=0) -> Outcome:
    par = cfg.coupling()
    tol = cfg.tolerances
    path = _seed_path(cfg, seed)
    if path:
        pair = io.read_pair(path, par)
        sol = newton_polish(pair, par, tol=1e-11, method="seeded-newton")
    else:
        grid = production_grid(par, cfg.n_points or PRODUCTION_POINTS, cfg.core_resolution)
        sol = coexistence_state(par, grid)
    cert = dg.certify(sol, res_tol=tol["res_tol"], mass_tol=tol["mass_tol"])
    files = [io.export_fields(sol, out / "fields.txt")]
    extra = {}
    if sweep:
        extra["resolution_sweep"] = _sweep(sol, sweep, _system_refine)
    return Outcome(sol.summary(), {"solution": cert}, files, extra)


def run_mountain_pass(cfg: RunConfig, out: Path, seed=None, sweep=0) -> Outcome:
    par = cfg.coupling()
    tol = cfg.tolerances
    mp = cfg.mountain_pass
    grid = path_grid(par, mp.get("path_points", 2001))
    _, _, path = build_endpoints(par, mp.get("eps"), grid=grid, n_nodes=mp.get("n_nodes", 21))
    res = mountain_pass_on_P(path, mp_tol=mp.get("mp_tol", tol["mp_tol"]),
                             max_iter=mp.get("max_iter", 600), proj_tol=tol["proj_tol"])
    fine = production_grid(par, cfg.n_points or PRODUCTION_POINTS, cfg.core_resolution)
    sol = transfer(res.solution, fine)
    cert = dg.certify(sol, res_tol=tol["res_tol"], mass_tol=tol["mass_tol"])
    C = path.info["C"]
    margin = sol.energy - (res.c - res.margin)
    cert.add(dg._entry("level_above_ground_states", margin, 0.0, ">"))
    cert.add(dg._entry("level_bound", sol.energy, C))
    cert.add(dg._entry("saddle_window", abs(res.c - res.discrete_max) / abs(res.discrete_max),
                       0.05))
    summary = dict(sol.summary(), c_path_grid=res.c, discrete_max=res.discrete_max,
                   margin=margin, C=C, sweeps=res.iterations, torn_segments=list(res.torn))
    files = [io.export_fields(sol, out / "fields.txt")]
    extra = {}
    if sweep:
        extra["resolution_sweep"] = _sweep(sol, sweep, _system_refine)
    return Outcome(summary, {"solution": cert}, files, extra)


def run_continue_beta(cfg: RunConfig, out: Path, seed=None, sweep=0) -> Outcome:
    sched = cfg.schedule
    par = cfg.coupling(sched[0])
    tol = cfg.tolerances
    path = _seed_path(cfg, seed)
    if path:
        start = newton_polish(io.read_pair(path, par), par, tol=1e-11, reject_liouville=False)
    else:
        grid = production_grid(par, cfg.n_points or PRODUCTION_POINTS, cfg.core_resolution)
        start = coexistence_state(par, grid)
    trace = continue_in_beta(start, sched)
    _, _, ref = build_endpoints(par, cfg.mountain_pass.get("eps"),
                                grid=path_grid(par, cfg.mountain_pass.get("path_points", 2001)),
                                n_nodes=cfg.mountain_pass.get("n_nodes", 21))
    C = ref.info["C"]
    with ThreadPoolExecutor(max_workers=threads()) as pool:
        certs = list(pool.map(lambda s: dg.certify(s, res_tol=tol["res_tol"],
                                                   mass_tol=tol["mass_tol"]), trace.solutions))
    certificates = {f"beta={row.beta:g}": c for row, c in zip(trace.rows, certs)}
    certificates["trace"] = dg.certify_trace(trace, res_tol=tol["res_tol"], C=C,
                                             strict_limit=cfg.strict_limit)
    files = [io.write_table(out / "trace.txt", tuple(trace.rows[0].__dataclass_fields__),
                            trace.table()),
             io.export_fields(trace.solutions[-1], out / "fields.txt")]
    summary = dict(trace.solutions[-1].summary(), C=C, rows=len(trace),
                   overlap_ratio=trace.overlaps[-1] / trace.overlaps[0])
    return Outcome(summary, certificates, files)


def run_verify(cfg: RunConfig, out: Path, seed=None, sweep=0) -> Outcome:
    path = _seed_path(cfg, seed)
    if not path:
        raise ConfigError("verify needs a field file (--seed or seeds.fields)")
    tol = cfg.tolerances
    meta = io.read_header(path)
    if meta.get("kind", "system") == "scalar":
        u = io.read_scalar(path)
        nl = cfg.nonlinearity()
        lam = float(np.dot(scalar_gradient(u, nl), u.values)) / u.mass
        sol = make_solution(u, lam, meta.get("a", np.sqrt(u.mass)), nl, method="verify")
        grad = dg.gradient_check(u, nl, seed=cfg.rng_seed)
        gn = [dg.check_gagliardo_nirenberg(u)]
    else:
        try:
            pair = io.read_pair(path)
        except KeyError as exc:
            raise ConfigError(f"field file header lacks {exc}") from exc
        lam = multipliers(pair)
        sol = make_system_solution(pair, lam[0], lam[1], method="verify")
        grad = dg.gradient_check(pair, seed=cfg.rng_seed)
        gn = [dg.check_gagliardo_nirenberg(pair.u1), dg.check_gagliardo_nirenberg(pair.u2)]
    cert = dg.certify(sol, res_tol=tol["res_tol"], mass_tol=tol["mass_tol"])
    cert.add(grad)
    for i, e in enumerate(gn, 1):
        cert.add(dg.CheckEntry(f"gagliardo_nirenberg_{i}", e.value, e.threshold, e.passed,
                               e.relation, e.info))
    extra = {}
    if sweep:
        extra["resolution_sweep"] = "not applicable to verify"
    return Outcome(sol.summary(), {"solution": cert}, [], extra)


RUNNERS = {"solve-scalar": run_solve_scalar, "solve-system": run_solve_system,
           "mountain-pass": run_mountain_pass, "continue-beta": run_continue_beta,
           "verify": run_verify}


def _reason(kind: str, **kv) -> str:
    parts = [f"error={kind}"] + [f"{k}={json.dumps(str(v))}" if " " in str(v) else f"{k}={v}"
                                 for k, v in kv.items()]
    return "normsol: " + " ".join(parts)


def _json_default(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def run(cfg: RunConfig, *, out: str | None = None, seed: str | None = None, sweep: int = 0,
        stderr=None) -> int:
    """Execute one run and return the exit status."""
    stderr = stderr or sys.stderr
    out_dir = Path(out or cfg.output)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        outcome = RUNNERS[cfg.mode](cfg, out_dir, seed, sweep)
    except ConfigError as exc:
        print(_reason("config", reason=str(exc)), file=stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(_reason("config", reason=str(exc)), file=stderr)
        return EXIT_CONFIG
    except (NormsolError, np.linalg.LinAlgError) as exc:
        print(_reason("solver", type=type(exc).__name__, reason=str(exc)), file=stderr)
        return EXIT_SOLVER
    doc = dict(mode=cfg.mode, config=cfg.echo, rng_seed=cfg.rng_seed, threads=threads(),
               summary=outcome.summary,
               certificates={k: c.to_dict() for k, c in outcome.certificates.items()},
               files=[p.name for p in outcome.files], **outcome.extra)
    (out_dir / "result.json").write_text(json.dumps(doc, indent=2, default=_json_default) + "\n")
    fails = outcome.failures()
    for name, c in fails:
        print(_reason("certificate", certificate=name, check=c.name, value=f"{c.value:.6g}",
                      threshold=c.threshold), file=stderr)
    return EXIT_CERT if fails else EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(_reason("config", reason=message), file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="normsol", description="Normalized solutions on radial grids.")
    p.add_argument("verb", choices=MODES)
    p.add_argument("--config", required=True, help="INI run file")
    p.add_argument("--out", help="output directory (overrides [output] directory)")
    p.add_argument("--seed", help="field file used as the initial guess")
    p.add_argument("--resolution-sweep", type=int, default=0, metavar="K",
                   help="repeat the solve on K successive grid halvings")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.resolution_sweep < 0:
        print(_reason("config", reason="--resolution-sweep must be nonnegative"), file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.verb)
    except ConfigError as exc:
        print(_reason("config", reason=str(exc)), file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, out=args.out, seed=args.seed, sweep=args.resolution_sweep)
