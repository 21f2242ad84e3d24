"""Plain-text field files: a ``#`` header of ``key = value`` lines, then columns.

Numbers are written with 17 significant digits so that a write-read cycle
reproduces every float exactly, grid nodes included.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .functionals import CouplingParams, StatePair
from .grid import RadialField, RadialGrid
from .scalar import ScalarSolution
from .system import SystemSolution

_FLOAT_KEYS = ("R_max", "a", "mu", "a1", "a2", "mu1", "mu2", "beta", "lambda", "lambda1",
               "lambda2", "energy")
_INT_KEYS = ("N", "n_points")


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def export_fields(sol, path, extra: dict | None = None) -> Path:
    """Write ``r`` and the component amplitudes of a solution (or a bare pair).

    The header records the grid and the physical parameters.
    """
    path = Path(path)
    if isinstance(sol, ScalarSolution):
        g = sol.u.grid
        meta = dict(kind="scalar", N=g.dimension, R_max=g.r_max, n_points=g.n_points,
                    a=sol.a, **{"lambda": sol.lam, "energy": sol.energy})
        cols = [g.nodes, sol.u.values]
        names = "r u"
    else:
        pair = sol.pair if isinstance(sol, SystemSolution) else sol
        g, p = pair.grid, pair.params
        meta = dict(kind="system", N=g.dimension, R_max=g.r_max, n_points=g.n_points,
                    a1=p.a1, a2=p.a2, mu1=p.mu1, mu2=p.mu2, beta=p.beta)
        if isinstance(sol, SystemSolution):
            meta.update(lambda1=sol.lambda1, lambda2=sol.lambda2, energy=sol.energy)
        cols = [g.nodes, pair.u1.values, pair.u2.values]
        names = "r u1 u2"
    meta.update(extra or {})
    lines = [f"# {k} = {_fmt(v)}" for k, v in meta.items()]
    lines.append(f"# columns = {names}")
    data = np.column_stack(cols)
    lines.extend(" ".join(format(x, ".17g") for x in row) for row in data)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_header(path) -> dict:
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition("=")
            key, value = key.strip(), value.strip()
            if key in _INT_KEYS:
                meta[key] = int(value)
            elif key in _FLOAT_KEYS:
                meta[key] = float(value)
            else:
                meta[key] = value
    return meta


def read_fields(path):
    """Inverse of :func:`export_fields`: returns ``(grid, columns, meta)``.

    ``columns`` holds the amplitude arrays after the ``r`` column.
    """
    meta = read_header(path)
    data = np.loadtxt(path, comments="#", ndmin=2)
    r = data[:, 0]
    n_dim = int(meta.get("N", 3))
    grid = RadialGrid(n_dim, float(r[-1]), r.size, r)
    if "n_points" in meta and meta["n_points"] != r.size:
        raise ValueError(f"header says {meta['n_points']} points, file has {r.size}")
    return grid, [data[:, j] for j in range(1, data.shape[1])], meta


def read_pair(path, params: CouplingParams | None = None) -> StatePair:
    """A :class:`StatePair` from a two-component field file."""
    grid, cols, meta = read_fields(path)
    if len(cols) != 2:
        raise ValueError(f"{path}: expected two amplitude columns, found {len(cols)}")
    if params is None:
        params = CouplingParams(meta["mu1"], meta["mu2"], meta["beta"], meta["a1"], meta["a2"])
    return StatePair(RadialField(grid, cols[0]), RadialField(grid, cols[1]), params)


def read_scalar(path) -> RadialField:
    grid, cols, _ = read_fields(path)
    return RadialField(grid, cols[0])


def write_table(path, header: tuple, rows) -> Path:
    """Whitespace-separated table with a ``#`` column header, plot-ready."""
    path = Path(path)
    lines = ["# " + " ".join(header)]
    lines.extend(" ".join(_fmt(float(x)) for x in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path
