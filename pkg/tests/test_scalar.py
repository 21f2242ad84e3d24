import numpy as np
import pytest

from normsol.errors import NodeTargetUnreachable
from normsol.functionals import Nonlinearity
from normsol.grid import resample
from normsol.scalar import (excited_state_by_nodes, ground_state_by_scaling,
                           ground_state_level, minimize_on_M, newton_polish_scalar,
                           scaled_grid, scaling_constants, shoot_profile, soliton_record)

from conftest import ORACLE, TWO_POWER


def test_soliton_record_matches_oracle():
    q = soliton_record(3)
    assert q.amplitude == pytest.approx(ORACLE["amplitude"], rel=1e-10)
    assert q.mass == pytest.approx(ORACLE["mass"], rel=1e-9)
    assert q.kinetic == pytest.approx(ORACLE["kinetic"], rel=1e-9)
    assert q.power_integral == pytest.approx(ORACLE["quartic"], rel=1e-9)
    # Pohozaev identity of the profile: K = (3/4) int Q^4, and lam = -1
    assert q.kinetic == pytest.approx(0.75 * q.power_integral, rel=1e-9)


def test_scaling_constants():
    c = scaling_constants(1.0, 1.0)
    assert c["lam"] == pytest.approx(ORACLE["lam_11"], rel=1e-9)
    assert ground_state_level(1.0, 1.0) == pytest.approx(ORACLE["level_11"], rel=1e-9)
    # lam scales like (mu a^2)^{-2}, the level like (mu a^2)^{-1} / mu
    assert scaling_constants(2.0, 3.0)["lam"] == pytest.approx(c["lam"] / 144, rel=1e-12)
    assert ground_state_level(2.0, 1.0) == pytest.approx(ORACLE["level_11"] / 4, rel=1e-10)


def test_level_is_quarter_quartic(cubic_ground_state):
    s = cubic_ground_state
    # J = K/2 - P/4 = P/8 + G/2, and G is small on the grid
    assert s.energy == pytest.approx(s.u.quartic / 8, rel=1e-5)
    assert s.energy == pytest.approx(ORACLE["level_11"], rel=1e-5)


def test_newton_polish_keeps_oracle(cubic_ground_state):
    nl = Nonlinearity.cubic()
    sol = newton_polish_scalar(cubic_ground_state, nl, 1.0)
    assert sol.el_residual < 1e-10
    assert sol.mass_error < 1e-12
    assert sol.lam == pytest.approx(ORACLE["lam_11"], rel=1e-5)
    assert sol.pohozaev_residual < 1e-6


def test_pohozaev_residual_is_second_order():
    nl = Nonlinearity.cubic()
    res = []
    for n in (1001, 2001, 4001):
        g = scaled_grid(1.0, 1.0, n_points=n)
        res.append(newton_polish_scalar(ground_state_by_scaling(1.0, 1.0, g), nl, 1.0)
                   .pohozaev_residual)
    ratios = np.array(res[:-1]) / np.array(res[1:])
    assert np.all((ratios > 3.5) & (ratios < 4.5))


def test_minimize_from_gaussian():
    g = scaled_grid(1.0, 2.0, n_points=4001)
    seed = g.sample(lambda r: np.exp(-r * r))
    sol = minimize_on_M(1.0, Nonlinearity.cubic(2.0), seed)
    ref = ground_state_by_scaling(1.0, 2.0, g)
    assert sol.node_count == 0 and sol.u.values.min() >= 0
    assert sol.lam == pytest.approx(ref.lam, rel=1e-3)
    assert sol.energy == pytest.approx(ref.energy, rel=1e-4)


def test_shoot_profile_node_counts():
    for k in range(3):
        prof = shoot_profile(TWO_POWER, -1.0, k)
        assert len(prof.zero_radii) == k
        assert prof.mass > 0


def test_node_states(node_states):
    for k, s in enumerate(node_states):
        assert s.node_count == k
        assert s.lam < 0
        assert s.mass_error < 1e-12
        assert s.el_residual < 1e-8
        assert s.pohozaev_residual < 1e-6


def test_node_target_range():
    with pytest.raises(NodeTargetUnreachable):
        excited_state_by_nodes(1.0, TWO_POWER, 7)


def test_sign_flip_is_a_solution(cubic_ground_state):
    nl = Nonlinearity.cubic()
    pos = newton_polish_scalar(cubic_ground_state, nl, 1.0)
    neg = newton_polish_scalar(-pos.u, nl, 1.0, lam=pos.lam)
    assert neg.energy == pytest.approx(pos.energy, rel=1e-12)
    assert neg.lam == pytest.approx(pos.lam, rel=1e-12)
    assert np.allclose(neg.u.values, -pos.u.values, atol=1e-9)


def test_resampled_warm_start_is_cheap(cubic_ground_state):
    nl = Nonlinearity.cubic()
    fine = cubic_ground_state.grid.refined(2)
    sol = newton_polish_scalar(resample(cubic_ground_state.u, fine), nl, 1.0,
                               lam=cubic_ground_state.lam)
    assert len(sol.history) <= 4
    assert sol.el_residual < 1e-10
