import re

import numpy as np
import pytest

from normsol import diagnostics as dg
from normsol.errors import ExponentOutOfRange
from normsol.functionals import CouplingParams, Nonlinearity, StatePair, multipliers
from normsol.grid import RadialGrid
from normsol.scalar import make_solution, newton_polish_scalar
from normsol.system import ContinuationTrace, make_system_solution

from conftest import random_bumps

LINE = re.compile(r"^check=\w+ value=\S+ threshold=\S+ status=(PASS|FAIL|PASS-vacuous|INFO)$")


def test_sharp_ratio_value():
    assert dg.sharp_gn_ratio(3, 4.0) == pytest.approx(0.449257016, rel=1e-8)
    with pytest.raises(ExponentOutOfRange):
        dg.gn_exponent(3, 6.0)
    with pytest.raises(ExponentOutOfRange):
        dg.sharp_gn_ratio(3, 3.0)


def test_gn_corpus():
    rng = np.random.default_rng(7)
    grid = RadialGrid.uniform(3, 20.0, 2001)
    worst = 0.0
    for _ in range(500):
        u = random_bumps(rng, grid, k=int(rng.integers(1, 5)), signed=bool(rng.integers(2)))
        e = dg.check_gagliardo_nirenberg(u)
        assert e.passed, e.line()
        worst = max(worst, e.value / e.info["sharp"])
    assert worst < 1.0


def test_gn_ratio_of_ground_state_is_sharp(cubic_ground_state):
    ratio = dg.gn_ratio(cubic_ground_state.u, 4.0)
    assert ratio == pytest.approx(dg.sharp_gn_ratio(3, 4.0), rel=1e-5)


def test_gn_explicit_bound():
    grid = RadialGrid.uniform(3, 12.0, 1201)
    u = grid.sample(lambda r: np.exp(-r * r))
    assert dg.check_gagliardo_nirenberg(u, 3.0, bound=1.0).passed


def test_decay_of_ground_state(cubic_ground_state):
    e = dg.check_decay(cubic_ground_state.u, cubic_ground_state.lam)
    assert e.passed
    assert e.value == pytest.approx(1.0, abs=0.02)


def test_decay_vacuous_and_positive_multiplier():
    grid = RadialGrid.uniform(3, 10.0, 1001)
    u = grid.sample(lambda r: np.where(r < 0.03, 1.0, 0.0))
    e = dg.check_decay(u, -1.0)
    assert e.passed and e.info.get("vacuous")
    assert e.line().endswith("status=PASS-vacuous")
    assert not dg.check_decay(u, 1.0).passed


def test_certificate_of_solution(cubic_ground_state):
    sol = newton_polish_scalar(cubic_ground_state, Nonlinearity.cubic(), 1.0)
    cert = dg.certify(sol)
    names = [c.name for c in cert.checks]
    assert names == ["pohozaev", "mass", "el_residual", "multiplier_sign", "decay"]
    for name in ("mass", "el_residual", "multiplier_sign", "decay"):
        assert cert[name].passed
    # the uniform 40001 grid resolves G only to ~5e-7
    assert not cert["pohozaev"].passed
    for c in cert.checks:
        assert LINE.match(c.line()), c.line()
    doc = cert.to_dict()
    assert doc["passed"] is False
    assert doc["provenance"]["n_points"] == sol.grid.n_points


def test_random_pair_fails(rng):
    grid = RadialGrid.uniform(3, 20.0, 2001)
    par = CouplingParams(1.0, 2.0, -5.0, 1.0, 1.0)
    pair = StatePair(random_bumps(rng, grid), random_bumps(rng, grid), par).normalized()
    lam = multipliers(pair)
    cert = dg.certify(make_system_solution(pair, *lam))
    assert not cert.passed
    assert not cert["el_residual"].passed
    assert not cert["pohozaev"].passed


def test_gradient_check_is_deterministic(cubic_ground_state):
    nl = Nonlinearity.cubic()
    a = dg.gradient_check(cubic_ground_state.u, nl, n_dirs=5, seed=3)
    b = dg.gradient_check(cubic_ground_state.u, nl, n_dirs=5, seed=3)
    assert a.value == b.value
    assert a.passed


def test_gradient_check_system(coexistence_small):
    e = dg.gradient_check(coexistence_small.pair, n_dirs=5)
    assert e.passed and e.value > 0


def test_scalar_sign_certificate():
    grid = RadialGrid.uniform(3, 10.0, 501)
    u = grid.sample(lambda r: np.exp(-r * r))
    sol = make_solution(u, 0.5, float(np.sqrt(u.mass)), Nonlinearity.cubic())
    assert not dg.check_multiplier_signs(sol).passed


def test_segregation_needs_a_trace(coexistence_small):
    trace = ContinuationTrace()
    trace.append(coexistence_small)
    with pytest.raises(ValueError):
        dg.check_segregation(trace)


def test_informational_entries_do_not_gate(coexistence_small):
    trace = ContinuationTrace()
    for sol in [coexistence_small] * 4:
        trace.append(sol)
    entries = {e.name: e for e in dg.check_segregation(trace, strict_limit=False)}
    assert entries["w_residual"].passed
    assert entries["w_residual"].line().endswith("status=INFO")
    assert not entries["w_residual"].info["strict_pass"]
    strict = {e.name: e for e in dg.check_segregation(trace)}
    assert not strict["w_residual"].passed


def test_entry_relations():
    assert dg._entry("x", 1.0, 1.0, "<=").passed
    assert not dg._entry("x", 1.0, 1.0, "<").passed
    assert dg._entry("x", 2.0, 1.0, ">").passed
    with pytest.raises(ValueError):
        dg._entry("x", 1.0, 1.0, "==")
