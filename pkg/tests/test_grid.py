import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chemotaxis_dsm.grid import (
    GridError,
    build_grid,
    dirichlet_energy,
    integrate,
    laplacian,
    laplacian_apply,
    lp_norm,
    mean,
)


def test_build_grid_1d_spacing_and_centers():
    g = build_grid(1, [8], [1.0])
    assert g.spacing == (0.125,)
    assert g.size == 8
    np.testing.assert_allclose(g.centers(0), 0.0625 + 0.125 * np.arange(8), rtol=0, atol=0)


def test_build_grid_2d():
    g = build_grid(2, [16, 16], [2 * math.pi, 2 * math.pi])
    assert g.size == 256
    assert g.spacing == (2 * math.pi / 16, 2 * math.pi / 16)
    assert g.shape == (16, 16)


def test_shape_is_y_major():
    g = build_grid(2, [8, 5], [1.0, 2.0])
    assert g.shape == (5, 8)
    x, y = g.mesh()
    assert x.shape == (5, 8)
    # i + nx * j ordering: consecutive flat entries move along x
    assert x.ravel()[1] > x.ravel()[0] and y.ravel()[1] == y.ravel()[0]


@pytest.mark.parametrize(
    "dim,cells,lengths",
    [(1, [2], [1.0]), (1, [8], [0.0]), (1, [8], [-1.0]), (3, [8, 8, 8], [1, 1, 1]), (2, [8], [1.0])],
)
def test_build_grid_rejects(dim, cells, lengths):
    with pytest.raises(GridError):
        build_grid(dim, cells, lengths)


def test_laplacian_of_constant_is_zero():
    g = build_grid(2, [12, 9], [1.0, 3.0])
    assert np.all(laplacian(g, g.full(3.7)) == 0.0)


def _eigen_error(n, L=1.0):
    g = build_grid(1, [n], [L])
    x = g.centers(0)
    f = np.cos(math.pi * x / L)
    exact = -((math.pi / L) ** 2) * f
    return float(np.max(np.abs(laplacian_apply(g, f) - exact)))


def test_laplacian_second_order_1d():
    ratio = _eigen_error(64) / _eigen_error(128)
    assert ratio == pytest.approx(4.0, rel=0.2)


def test_laplacian_second_order_2d():
    def err(n):
        g = build_grid(2, [n, n], [1.0, 2.0])
        x, y = g.mesh()
        f = np.cos(math.pi * x) * np.cos(math.pi * y / 2)
        exact = -(math.pi**2 + (math.pi / 2) ** 2) * f
        return float(np.max(np.abs(laplacian(g, f) - exact)))

    assert err(32) / err(64) == pytest.approx(4.0, rel=0.2)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (7, 6), elements=st.floats(-1e3, 1e3)))
def test_laplacian_integrates_to_zero(f):
    g = build_grid(2, [6, 7], [1.3, 0.7])
    scale = max(1.0, float(np.max(np.abs(f))))
    assert abs(integrate(g, laplacian(g, f))) <= 1e-12 * scale * g.measure / min(g.spacing) ** 2


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (6, 9), elements=st.floats(-10, 10)))
def test_laplacian_commutes_with_reflection(f):
    g = build_grid(2, [9, 6], [1.0, 1.0])
    for axis in (0, 1):
        left = laplacian(g, np.flip(f, axis=axis))
        right = np.flip(laplacian(g, f), axis=axis)
        np.testing.assert_allclose(left, right, rtol=0, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 8), elements=st.floats(-10, 10)))
def test_dirichlet_energy_is_summation_by_parts(f):
    g = build_grid(2, [8, 5], [2.0, 1.0])
    lhs = dirichlet_energy(g, f)
    rhs = -float(np.sum(f * laplacian(g, f))) * g.cell_volume
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-9)


def test_integrate_and_mean():
    g = build_grid(1, [10], [1.0])
    assert integrate(g, g.full(1.0)) == pytest.approx(1.0, abs=1e-15)
    g2 = build_grid(2, [8, 4], [3.0, 2.0])
    assert integrate(g2, g2.full(2.5)) == pytest.approx(2.5 * 6.0, rel=1e-15)
    assert mean(g2, g2.full(2.5)) == pytest.approx(2.5, rel=1e-15)


def test_midpoint_integral_of_cosine_vanishes():
    g = build_grid(1, [128], [1.0])
    assert abs(integrate(g, np.cos(math.pi * g.centers(0)))) < 1e-12


def test_mean_of_centred_field_is_zero():
    g = build_grid(2, [16, 16], [1.0, 1.0])
    u = np.random.default_rng(1).uniform(0, 5, g.shape)
    assert abs(mean(g, u - mean(g, u))) <= 1e-14 * np.max(np.abs(u))


def test_lp_norms():
    g = build_grid(1, [4], [1.0])
    for p in (1, 2, 3.5, math.inf):
        assert lp_norm(g, g.full(-2.0), p) == pytest.approx(2.0, rel=1e-14)
    g3 = build_grid(1, [4], [4.0])
    assert lp_norm(g3, np.array([1.0, -3.0, 2.0, 0.0]), math.inf) == 3.0
    g = build_grid(1, [256], [1.0])
    h = g.spacing[0]
    f = np.cos(math.pi * g.centers(0))
    assert abs(lp_norm(g, f, 2) - math.sqrt(0.5)) <= 2 * h * h


def test_lp_norm_approaches_sup_norm():
    g = build_grid(1, [64], [1.0])
    f = np.sin(3 * g.centers(0)) + 0.2
    assert lp_norm(g, f, 64) == pytest.approx(lp_norm(g, f, math.inf), rel=0.05)


def test_lp_norm_rejects_small_p():
    g = build_grid(1, [4], [1.0])
    with pytest.raises(GridError):
        lp_norm(g, g.full(1.0), 0.5)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 12, elements=st.floats(0, 100)), st.floats(1, 8))
def test_lp_norm_monotone_in_absolute_values(f, p):
    g = build_grid(1, [12], [2.0])
    assert lp_norm(g, f, p) <= lp_norm(g, f * 1.5 + 0.1, p) + 1e-12


def test_shape_mismatch_is_rejected():
    g = build_grid(1, [8], [1.0])
    with pytest.raises(GridError):
        laplacian(g, np.zeros(9))
