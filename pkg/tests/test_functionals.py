from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from normsol.errors import ExponentOutOfRange, NotInCone
from normsol.functionals import (CouplingParams, Nonlinearity, StatePair, constraint_G,
                                 energy_J, fiber_argmax, fiber_value, in_cone_E, multipliers,
                                 project_to_M, project_to_P, scalar_constraint_G,
                                 scalar_energy_I, scalar_fiber_argmax, scalar_fiber_value,
                                 system_gradient)
from normsol.grid import RadialGrid

from conftest import random_bumps

GRID = RadialGrid.uniform(3, 20.0, 1201)


def test_nonlinearity_exponent_window():
    with pytest.raises(ExponentOutOfRange):
        Nonlinearity.cubic(dimension=2)
    with pytest.raises(ExponentOutOfRange):
        Nonlinearity.power_sum([1.0], [3.0])
    nl = Nonlinearity.power_sum([1.0, 2.0], [3.5, 5.0])
    u = np.linspace(-2, 2, 9)
    assert np.allclose(nl.F_tilde(u), nl.f(u) * u - 2 * nl.F(u))


def test_coupling_params():
    p = CouplingParams(1.0, 2.0, -3.0, 0.5, 1.5)
    assert p.swapped() == CouplingParams(2.0, 1.0, -3.0, 1.5, 0.5)
    assert not p.cone_is_everything
    with pytest.raises(ValueError):
        CouplingParams(0.0, 1.0, -1.0, 1.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(k=st.floats(0.1, 10.0), q=st.floats(0.1, 10.0))
def test_fiber_argmax_is_strict_maximum(k, q):
    s0 = fiber_argmax(k, q)
    pair = SimpleNamespace(kinetic=k, quartic_form=q)
    s = np.linspace(s0 - 4, s0 + 4, 401)
    vals = fiber_value(pair, s)
    assert np.all(vals <= fiber_value(pair, s0) * (1 + 1e-14))
    assert np.argmax(vals) == 200


def test_fiber_argmax_outside_cone():
    with pytest.raises(NotInCone):
        fiber_argmax(1.0, -1.0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), beta=st.floats(-5.0, 1.0))
def test_project_to_P(seed, beta):
    rng = np.random.default_rng(seed)
    # masses near |Q|^2 keep the fiber maximum at moderate s
    par = CouplingParams(1.0, rng.uniform(0.5, 3.0), beta, rng.uniform(3.0, 6.0),
                         rng.uniform(3.0, 6.0))
    pair = StatePair(random_bumps(rng, GRID), random_bumps(rng, GRID), par).normalized()
    if not in_cone_E(pair):
        with pytest.raises(NotInCone):
            project_to_P(pair)
        return
    # dilations beyond e^4 leave the resolved range of the grid
    assume(abs(fiber_argmax(pair.kinetic, pair.quartic_form)) < 4)
    q, s = project_to_P(pair, s_cap=12.0)
    assert abs(constraint_G(q)) <= 1e-10 * (q.kinetic + abs(q.quartic_form))
    assert q.mass_error() < 1e-12
    # the projected pair is the fiber maximum
    assert abs(fiber_argmax(q.kinetic, q.quartic_form)) < 1e-8


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_project_to_M_two_power(seed):
    rng = np.random.default_rng(seed)
    nl = Nonlinearity.power_sum(rng.uniform(0.2, 2.0, 2), [rng.uniform(3.4, 4.5),
                                                          rng.uniform(4.6, 5.8)])
    u = random_bumps(rng, GRID, signed=True).normalized(1.0)
    v, _ = project_to_M(u, nl, s_cap=12.0)
    assert abs(scalar_fiber_argmax(v, nl, s_cap=12.0)) < 1e-8
    s = np.linspace(-3, 3, 401)
    assert np.all(scalar_fiber_value(v, nl, s) <= scalar_energy_I(v, nl) + 1e-12)
    assert abs(scalar_constraint_G(v, nl)) < 1e-9 * v.grad_norm_sq


def test_system_gradient_matches_energy(rng):
    par = CouplingParams(1.0, 2.0, -4.0, 1.0, 1.0)
    pair = StatePair(random_bumps(rng, GRID), random_bumps(rng, GRID), par)
    g = system_gradient(pair)
    d = np.stack([random_bumps(rng, GRID, signed=True).values for _ in range(2)])
    h = 1e-6
    up = StatePair(GRID.field(pair.u1.values + h * d[0]), GRID.field(pair.u2.values + h * d[1]), par)
    dn = StatePair(GRID.field(pair.u1.values - h * d[0]), GRID.field(pair.u2.values - h * d[1]), par)
    fd = (energy_J(up) - energy_J(dn)) / (2 * h)
    assert np.vdot(g, d) == pytest.approx(fd, rel=1e-6)


def test_multipliers_of_decoupled_soliton(cubic_ground_state):
    u = cubic_ground_state.u
    pair = StatePair(u, u, CouplingParams(1.0, 1.0, 0.0, 1.0, 1.0))
    lam = multipliers(pair)
    assert lam[0] == pytest.approx(cubic_ground_state.lam, rel=1e-5)
    assert lam[0] == pytest.approx(lam[1], rel=1e-14)
