import numpy as np
import pytest
from hypothesis import given, strategies as st

from enskog.phase_grid import (SpatialGrid, build_sphere_quadrature, build_velocity_grid,
                               maxwellian, shifted_value)


def test_cube_volume():
    vg = build_velocity_grid(1.0, 4)
    assert vg.n_nodes == 64
    assert vg.weights.sum() == pytest.approx(8.0, rel=1e-14)


def test_gaussian_integral():
    vg = build_velocity_grid(6.0, 24)
    total = np.exp(-0.5 * np.sum(vg.nodes ** 2, axis=1)).sum() * vg.cell_volume
    assert abs(total - (2 * np.pi) ** 1.5) < 1e-6


def test_odd_count_rejected():
    with pytest.raises(ValueError, match="symmetry"):
        build_velocity_grid(5.0, 7)


@given(st.sampled_from([4, 6, 8, 10]), st.floats(0.5, 10.0))
def test_grid_symmetric(n, xi_max):
    vg = build_velocity_grid(xi_max, n)
    nodes = vg.nodes
    assert np.array_equal(nodes[vg.parity_index()], -nodes)
    flipped = nodes[vg.mirror_index(0)]
    assert np.array_equal(flipped[:, 0], -nodes[:, 0])
    assert np.array_equal(flipped[:, 1:], nodes[:, 1:])


@given(st.integers(0, 2**32 - 1))
def test_odd_moments_vanish(seed):
    vg = build_velocity_grid(4.0, 8)
    rng = np.random.default_rng(seed)
    even = rng.random(vg.n_nodes)
    even = even + even[vg.parity_index()]
    odd_integrand = even * vg.nodes[:, rng.integers(3)]
    assert abs(odd_integrand.sum()) <= 1e-13 * np.abs(odd_integrand).sum()


@pytest.mark.parametrize("order", [2, 3, 4, 8])
def test_sphere_rule(order):
    q = build_sphere_quadrature(order)
    assert np.all(q.weights > 0)
    assert abs(q.weights.sum() - 4 * np.pi) < 1e-10
    assert np.abs(np.linalg.norm(q.directions, axis=1) - 1).max() < 1e-12
    second = np.einsum("q,qi,qj->ij", q.weights, q.directions, q.directions)
    assert np.abs(second - 4 * np.pi / 3 * np.eye(3)).max() < 1e-8
    anti = q.antipode_index()
    assert np.abs(q.directions[anti] + q.directions).max() < 1e-15
    assert np.array_equal(q.weights[anti], q.weights)


@pytest.mark.parametrize("order", [2, 3, 6])
def test_half_sphere_flux(order):
    q = build_sphere_quadrature(order)
    va = q.directions @ np.array([1.0, 0.0, 0.0])
    assert abs(np.sum(q.weights * np.maximum(va, 0)) - np.pi) < 1e-6


def test_low_order_rejected():
    with pytest.raises(ValueError):
        build_sphere_quadrature(1)


def test_shifted_constant_and_clipping():
    g = SpatialGrid(10.0, 5)
    c = np.full(5, 3.5)
    assert shifted_value(c, g, 4.0, 0.7) == pytest.approx(3.5)
    assert shifted_value(c, g, 0.0, -1.0) == 0.0
    assert shifted_value(c, g, 10.0, 0.5) == 0.0
    assert shifted_value(c, g, 0.0, 0.0) == pytest.approx(3.5)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.0, 1.0))
def test_shifted_linear_exact(a, b, u):
    g = SpatialGrid(8.0, 16)
    x = g.centers
    p = x[0] + u * (x[-1] - x[0])
    val = shifted_value(a * x + b, g, p, 0.0)
    assert abs(val - (a * p + b)) <= 1e-12 * (1 + abs(a) * 8 + abs(b))


@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6),
       st.lists(st.floats(-5, 5), min_size=6, max_size=6),
       st.floats(-4, 12), st.floats(-2, 2))
def test_shifted_linear_and_contractive(f1, f2, x, s):
    g = SpatialGrid(6.0, 6)
    f1, f2 = np.array(f1), np.array(f2)
    lhs = shifted_value(2 * f1 - f2, g, x, s)
    rhs = 2 * shifted_value(f1, g, x, s) - shifted_value(f2, g, x, s)
    assert abs(lhs - rhs) <= 1e-12 * (1 + np.abs(f1).max() + np.abs(f2).max())
    assert abs(shifted_value(f1, g, x, s)) <= np.abs(f1).max() + 1e-15


def test_maxwellian_broadcast():
    vg = build_velocity_grid(6.0, 12)
    m = maxwellian(vg.nodes, np.array([1.0, 2.0]), np.zeros((2, 3)), np.array([1.0, 1.5]), 1.0)
    assert m.shape == (2, vg.n_nodes)
    dens = m.sum(axis=1) * vg.cell_volume
    assert np.allclose(dens, [1.0, 2.0], rtol=1e-4)
