import numpy as np
import pytest

from normsol.errors import DilationOutOfRange
from normsol.grid import (RadialGrid, apply_laplacian, dilate, resample, sphere_area,
                          warn_if_truncated)


def gaussian(r):
    return np.exp(-r * r)


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * np.pi)
    assert sphere_area(3) == pytest.approx(4 * np.pi)


def test_weights_sum_to_ball_volume():
    for g in (RadialGrid.uniform(3, 5.0, 101), RadialGrid.graded(3, 5.0, 101, 2.0)):
        assert g.weights.sum() == pytest.approx(g.volume(), rel=1e-13)


def test_rejects_bad_nodes():
    with pytest.raises(ValueError):
        RadialGrid(3, 1.0, 3, np.array([0.0, 0.6, 0.5]))
    with pytest.raises(ValueError):
        RadialGrid.uniform(3, 1.0, 2)


def test_gaussian_quadratures():
    g = RadialGrid.uniform(3, 8.0, 4001)
    u = g.sample(gaussian)
    assert u.mass == pytest.approx((np.pi / 2) ** 1.5, rel=1e-5)
    # int |grad e^{-r^2}|^2 = 3 (pi/2)^{3/2}
    assert u.grad_norm_sq == pytest.approx(3 * (np.pi / 2) ** 1.5, rel=1e-5)


def test_laplacian_of_gaussian():
    g = RadialGrid.uniform(3, 8.0, 4001)
    lap = apply_laplacian(g.sample(gaussian)).values
    r = g.nodes
    exact = (6 - 4 * r * r) * np.exp(-r * r)
    assert np.max(np.abs(lap[:-1] - exact[:-1])) < 1e-4


def test_stiffness_is_symmetric_positive():
    g = RadialGrid.graded(3, 4.0, 60, 1.5)
    diag, off = g.stiffness_bands
    S = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    free = S[:-1, :-1]
    assert np.allclose(free, free.T)
    assert np.linalg.eigvalsh(free).min() > 0


def test_dilation_preserves_mass_and_scales_kinetic():
    g = RadialGrid.uniform(3, 20.0, 8001)
    u = g.sample(gaussian)
    for s in (-0.7, 0.3, 1.1):
        v = dilate(u, s)
        assert v.mass == pytest.approx(u.mass, rel=1e-4)
        assert v.grad_norm_sq == pytest.approx(np.exp(2 * s) * u.grad_norm_sq, rel=1e-4)
    assert dilate(u, 0.0) is u


def test_dilation_cap():
    g = RadialGrid.uniform(3, 5.0, 51)
    with pytest.raises(DilationOutOfRange):
        dilate(g.sample(gaussian), 6.0)


def test_refined_and_resample():
    g = RadialGrid.graded(3, 6.0, 201, 2.0)
    fine = g.refined(2)
    assert fine.n_points == 401
    assert np.allclose(fine.nodes[::2], g.nodes)
    u = g.sample(gaussian)
    v = resample(u, fine)
    assert v.mass == pytest.approx(u.mass, rel=1e-3)
    assert np.allclose(resample(v, g).values, u.values, atol=1e-12)


def test_node_count_and_sup():
    g = RadialGrid.uniform(3, 10.0, 1001)
    u = g.sample(lambda r: np.cos(r) * np.exp(-0.1 * r * r))
    assert u.node_count() == 3
    assert u.sup() == pytest.approx(1.0)
    assert (-u).node_count() == 3


def test_truncation_warning():
    g = RadialGrid.uniform(3, 2.0, 101)
    with pytest.warns(UserWarning):
        warn_if_truncated(g.sample(lambda r: np.exp(-0.1 * r)))
