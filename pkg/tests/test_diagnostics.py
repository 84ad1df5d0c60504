import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from enskog import diagnostics as dg
from enskog.correlation import Box, CorrelationModel, WeightField, config_phi, g_cs, invert_density_to_w
from enskog.dynamics import VlasovField
from enskog.phase_grid import SpatialGrid, build_velocity_grid, maxwellian
from enskog.verify import _workspace, smooth_state

VG = build_velocity_grid(6.0, 12)


def _field(space, vg, rho, v, temp):
    n = space.n_cells
    return maxwellian(vg.nodes, np.broadcast_to(rho, (n,)).astype(float),
                      np.broadcast_to(v, (n, 3)).astype(float),
                      np.broadcast_to(temp, (n,)).astype(float), 1.0)


def test_maxwellian_moments():
    vg = build_velocity_grid(7.0, 20)
    f = maxwellian(vg.nodes, 0.8, np.array([0.3, -0.2, 0.1]), 1.3, 1.0)[None]
    m = dg.moments(f, vg, 1.0)
    assert m.rho[0] == pytest.approx(0.8, rel=1e-4)
    assert np.allclose(m.v[0], [0.3, -0.2, 0.1], rtol=1e-4, atol=1e-6)
    assert m.temp[0] == pytest.approx(1.3, rel=1e-4)
    assert np.abs(m.heat).max() < 1e-4
    assert np.abs(m.stress[0] - np.diag(np.diag(m.stress[0]))).max() < 1e-4


def test_vacuum_convention():
    m = dg.moments(np.zeros((2, VG.n_nodes)), VG, 1.0, t_vacuum=0.7)
    assert np.all(m.rho == 0) and np.all(m.v == 0) and np.all(m.temp == 0.7)


@given(st.integers(0, 2**31))
def test_reductions_order_independent(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((3, 500)) * 10.0 ** rng.uniform(-8, 8, (3, 500))
    perm = rng.permutation(500)
    assert np.array_equal(dg.exact_rowsum(a), dg.exact_rowsum(a[:, perm]))
    assert dg.exact_rowsum(a)[0] == math.fsum(a[0, ::-1])


def test_moments_reversed_nodes_bit_identical():
    f = np.random.default_rng(4).random((3, VG.n_nodes))
    rho = dg.moments(f, VG, 1.0).rho
    assert np.array_equal(rho, np.array([math.fsum(r[::-1]) for r in f]) * VG.cell_volume)


@pytest.mark.parametrize("kind", ["unity", "contact_cs"])
def test_collisional_pressure_oracle(kind):
    sp = SpatialGrid(8.0, 8)
    rho, temp = 0.3, 1.0
    f = _field(sp, VG, rho, 0.0, temp)
    ws = _workspace(sp, VG, 4, model=CorrelationModel(kind, sigma=1.0, mass=1.0))
    cf = dg.collisional_fluxes(f, ws, points=[4.0])
    g = 1.0 if kind == "unity" else g_cs(np.pi * rho / 6)
    want = 2 * np.pi / 3 * g * rho ** 2 * temp
    diag = np.diag(cf.stress[0])
    assert np.abs(diag / want - 1).max() < 0.02
    assert np.abs(cf.stress[0] - np.diag(diag)).max() <= 1e-3 * want


def test_collisional_stress_scales_like_sigma_cubed():
    sp = SpatialGrid(8.0, 8)
    f = _field(sp, VG, 0.2, 0.0, 1.0)
    p = [dg.collisional_fluxes(f, _workspace(sp, VG, 4, sigma=s), points=[4.0]).stress[0, 0, 0]
         for s in (0.4, 0.2, 0.1)]
    assert p[0] / p[1] == pytest.approx(8.0, rel=1e-10)
    assert p[1] / p[2] == pytest.approx(8.0, rel=1e-10)


@pytest.mark.parametrize("v", [(0.0, 0.0, 0.0), (0.4, -0.3, 0.2)])
def test_equilibrium_heat_flow_vanishes(v):
    sp = SpatialGrid(8.0, 8)
    f = _field(sp, VG, 0.3, np.array(v), 1.0)
    ws = _workspace(sp, VG, 4)
    cf = dg.collisional_fluxes(f, ws, points=[3.0, 4.0, 5.0])
    scale = np.abs(cf.stress).max() * math.sqrt(2.0)
    assert np.abs(cf.heat).max() < 1e-3 * scale


def test_heat_flow_opposes_temperature_gradient():
    sp = SpatialGrid(16.0, 16)
    temp = 1.0 + 0.02 * (sp.centers - 8.0)
    rho = 0.3 / temp   # uniform pressure
    f = _field(sp, VG, rho, 0.0, temp)
    ws = _workspace(sp, VG, 4)
    q = dg.collisional_fluxes(f, ws, points=[6.0, 8.0, 10.0]).heat
    assert np.all(q[:, 0] < 0)
    assert np.abs(q[:, 1:]).max() < 1e-3 * np.abs(q[:, 0]).min()


def test_wall_fluxes_identically_zero():
    sp = SpatialGrid(8.0, 8)
    f = smooth_state(sp, VG, np.random.default_rng(1))
    ws = _workspace(sp, VG, 4, sigma=1.5)
    cf = dg.collisional_fluxes(f, ws, points=[0.0, 8.0])
    assert not cf.stress.any() and not cf.heat.any()


def test_kinetic_h_closed_form():
    vg = build_velocity_grid(7.0, 20)
    sp = SpatialGrid(5.0, 5)
    rho, temp = 0.4, 1.3
    f = _field(sp, vg, rho, np.array([0.2, 0, 0]), temp)
    want = sp.length * rho * (math.log(rho / (2 * math.pi * temp) ** 1.5) - 1.5)
    assert dg.h_kinetic(f, vg, sp) == pytest.approx(want, rel=1e-4)
    assert dg.h_kinetic(np.zeros_like(f), vg, sp) == 0.0


@given(st.integers(0, 2**31))
def test_kinetic_h_doubling(seed):
    sp = SpatialGrid(4.0, 4)
    vg = build_velocity_grid(5.0, 6)
    f = np.random.default_rng(seed).random((4, vg.n_nodes))
    f[0, :5] = 0.0
    mass = f.sum() * vg.cell_volume * sp.dx
    h1, h2 = dg.h_kinetic(f, vg, sp), dg.h_kinetic(2 * f, vg, sp)
    assert h2 == pytest.approx(2 * h1 + 2 * mass * math.log(2), rel=1e-12, abs=1e-12)


def test_collisional_h_modes():
    sp = SpatialGrid(4.0, 4)
    rho = np.array([0.1, 0.3, 0.2, 0.4])
    M = rho.sum() * sp.dx
    assert dg.h_collisional(rho, sp, "ideal") == pytest.approx(-M * math.log(M), rel=1e-15)
    assert dg.h_collisional(rho, sp, "ideal") == dg.h_collisional(rho[::-1], sp, "ideal")
    assert dg.h_collisional(rho * 1e-12, sp, "cs_surrogate", sigma=1.0) < 1e-20
    assert dg.h_collisional(rho, sp, "cs_surrogate", sigma=1.0) > 0
    with pytest.raises(ValueError):
        dg.h_collisional(rho, sp, "config_oracle")


def test_oracle_h_ideal_and_two_particle():
    box = Box((4.0, 4.0, 4.0))
    rho = np.array([0.2, 0.3, 0.3, 0.2]) * 2 / (1.0 * 16)
    ideal = invert_density_to_w(rho, box, 2, 0.0, 1.0, samples=100)
    assert dg.h_collisional(None, None, "config_oracle", state=ideal) == pytest.approx(
        -2 * math.log(2), abs=1e-12)
    ring = Box((4.0, 4.0, 4.0), (True, True, True))
    sigma = 0.8
    st_ = invert_density_to_w(np.full(4, 2 / 64), ring, 2, sigma, 1.0, samples=20000, seed=3)
    phi_exact = 1 - 4 * math.pi / 3 * sigma ** 3 / ring.volume
    want = -2 * math.log(2) - math.log(phi_exact)
    # H_c = -m N ln(m N) - m ln(phi) up to the Monte-Carlo error of phi
    se = st_.y_se.max() / st_.phi
    assert abs(st_.h_collisional() - want) <= 3 * se


def test_pairing_rule():
    dg.check_pairing("unity", "ideal")
    with pytest.raises(ValueError, match="paired"):
        dg.check_pairing("contact_cs", "config_oracle")


@given(st.integers(0, 2**31), st.floats(0.5, 2.0))
def test_free_energy_decomposition(seed, t_wall):
    sp = SpatialGrid(4.0, 4)
    vg = build_velocity_grid(5.0, 6)
    f = np.random.default_rng(seed).random((4, vg.n_nodes))
    hc = 0.37
    F, Fp = dg.free_energy(f, vg, sp, t_wall, 1.0, hc, potential=-0.25)
    M = f.sum() * vg.cell_volume * sp.dx
    const = t_wall * M * 1.5 * math.log(2 * math.pi * t_wall)
    want = t_wall * (dg.h_kinetic(f, vg, sp) + hc) + dg.total_energy(f, vg, sp) + const
    assert F == pytest.approx(want, rel=1e-10, abs=1e-10)
    assert Fp == pytest.approx(F - 0.25, rel=1e-14)


@given(st.lists(st.floats(0, 1), min_size=8, max_size=8))
def test_potential_energy_mirror_invariant(rho):
    sp = SpatialGrid(16.0, 8)
    field = VlasovField(1.0, 6.0)
    rho = np.array(rho)
    a = field.potential_energy(rho, sp)
    assert a == pytest.approx(field.potential_energy(rho[::-1], sp), rel=1e-12, abs=1e-15)
    assert a <= 0
