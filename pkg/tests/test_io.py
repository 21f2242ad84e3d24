import numpy as np
import pytest

from normsol import io
from normsol.functionals import Nonlinearity
from normsol.scalar import newton_polish_scalar
from normsol.system import newton_polish


def test_scalar_round_trip(tmp_path, cubic_ground_state):
    path = io.export_fields(cubic_ground_state, tmp_path / "u.txt")
    meta = io.read_header(path)
    assert meta["kind"] == "scalar"
    assert meta["n_points"] == cubic_ground_state.grid.n_points
    assert meta["lambda"] == cubic_ground_state.lam
    u = io.read_scalar(path)
    assert np.array_equal(u.values, cubic_ground_state.u.values)
    assert np.array_equal(u.grid.nodes, cubic_ground_state.grid.nodes)


def test_system_round_trip(tmp_path, coexistence_small):
    path = io.export_fields(coexistence_small, tmp_path / "pair.txt", extra=dict(note="x"))
    meta = io.read_header(path)
    assert meta["note"] == "x"
    assert meta["beta"] == coexistence_small.params.beta
    pair = io.read_pair(path)
    assert pair.params == coexistence_small.params
    assert np.array_equal(pair.stacked(), coexistence_small.pair.stacked())


def test_reloaded_fields_are_fixed_points(tmp_path, coexistence_small, cubic_ground_state):
    s = coexistence_small
    pair = io.read_pair(io.export_fields(s, tmp_path / "p.txt"))
    again = newton_polish(pair, lam=(s.lambda1, s.lambda2), tol=1e-11)
    assert len(again.history) <= 3
    nl = Nonlinearity.cubic()
    polished = newton_polish_scalar(cubic_ground_state, nl, 1.0)
    u = io.read_scalar(io.export_fields(polished, tmp_path / "u.txt"))
    sol = newton_polish_scalar(u, nl, 1.0, lam=polished.lam)
    assert len(sol.history) <= 3


def test_header_mismatch(tmp_path, coexistence_small):
    path = io.export_fields(coexistence_small, tmp_path / "p.txt")
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-2] + [lines[-1]]) + "\n")
    with pytest.raises(ValueError):
        io.read_pair(path)


def test_write_table(tmp_path):
    path = io.write_table(tmp_path / "t.txt", ("a", "b"), [[1.0, 2.5], [3.0, 4.0]])
    assert path.read_text().splitlines()[0] == "# a b"
    assert np.loadtxt(path).shape == (2, 2)
