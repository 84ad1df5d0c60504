import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from enskog import collision
from enskog.boundary import WallKernel, build_wall
from enskog.dynamics import (SimulationState, Stepper, VlasovField, advect, cfl_dt,
                             force_shift, linear_growth, steps_for)
from enskog.phase_grid import SpatialGrid, build_velocity_grid, maxwellian
from enskog.verify import _workspace, smooth_state

VG = build_velocity_grid(5.0, 8)


def _walls(vg=VG, t_wall=1.0, kind="diffuse"):
    return (build_wall(WallKernel(kind, t_wall=t_wall, normal=1), vg, 1.0),
            build_wall(WallKernel(kind, t_wall=t_wall, normal=-1), vg, 1.0))


def test_uniform_state_interior_unchanged():
    sp = SpatialGrid(8.0, 8)
    f = np.repeat(maxwellian(VG.nodes, 0.2, np.array([0.3, 0, 0]), 1.4, 1.0)[None], 8, 0)
    out = advect(f, cfl_dt(sp, VG, 0.9), sp, VG, *_walls())
    assert np.array_equal(out[1:-1], f[1:-1])
    # the wall equilibrium is stationary everywhere
    fw = np.repeat(0.2 * _walls()[0].f_wall[None], 8, 0)
    assert np.abs(advect(fw, 0.1, sp, VG, *_walls()) - fw).max() <= 1e-15 * fw.max()


def test_pulse_mass_and_speed():
    sp = SpatialGrid(40.0, 40)
    f = np.zeros((40, VG.n_nodes))
    node = int(np.argmax(VG.nodes[:, 0] + 1e-3 * VG.nodes[:, 1]))
    f[10, node] = 1.0
    dt = cfl_dt(sp, VG, 0.5)
    x = sp.centers
    mass0 = f.sum()
    com0 = x @ f[:, node]
    for k in range(1, 21):
        f = advect(f, dt, sp, VG, *_walls())
        assert abs(f.sum() - mass0) <= 1e-12 * mass0
        # upwind moves the centre of mass at exactly the node speed
        assert (x @ f[:, node]) / f[:, node].sum() == pytest.approx(
            com0 + k * dt * VG.nodes[node, 0], rel=1e-12)


def _stream_error(n_cells):
    vg = build_velocity_grid(1.0, 4)
    sp = SpatialGrid(40.0, n_cells)
    node = int(np.argmax(vg.nodes[:, 0]))
    c = vg.nodes[node, 0]
    x = sp.centers
    prof = lambda s: np.exp(-((s - 12.0) / 4.0) ** 2)
    f = np.zeros((n_cells, vg.n_nodes))
    f[:, node] = prof(x)
    dt = cfl_dt(sp, vg, 0.5)
    n = steps_for(10.0 / c, dt)
    for _ in range(n):
        f = advect(f, dt, sp, vg, *_walls(vg))
    return np.abs(f[:, node] - prof(x - n * dt * c)).sum() * sp.dx, sp.dx


def test_free_streaming_first_order():
    e1, dx1 = _stream_error(80)
    e2, dx2 = _stream_error(160)
    assert e1 < 3 * dx1 and e2 < 3 * dx2
    assert 1.7 < e1 / e2 < 2.3


def test_advect_rejects_large_cfl():
    sp = SpatialGrid(8.0, 8)
    with pytest.raises(ValueError, match="CFL"):
        advect(np.zeros((8, VG.n_nodes)), 2 * sp.dx / VG.xi_max, sp, VG, *_walls())


def test_force_shift_translates_maxwellian():
    vg = build_velocity_grid(6.0, 12)
    f = maxwellian(vg.nodes, np.array([0.3, 0.5]), np.zeros((2, 3)), np.array([1.0, 1.2]), 1.0)
    out = force_shift(f, np.array([0.4, -0.2]), 0.5, vg, 1.0)
    want = maxwellian(vg.nodes, np.array([0.3, 0.5]), np.array([[0.2, 0, 0], [-0.1, 0, 0]]),
                      np.array([1.0, 1.2]), 1.0)
    want *= (f.sum(1) / want.sum(1))[:, None]
    assert np.abs(out - want).max() <= 1e-6 * f.max()
    assert np.allclose(out.sum(1), f.sum(1), rtol=1e-14)


def test_periodic_uniform_force_vanishes():
    field = VlasovField(1.0, 6.0)
    dx = 0.5
    d = np.arange(-200, 201)
    # an infinite uniform layer: the stencil telescopes to K(+R) - K(-R) = 0
    total = np.sum(field.kernel((d + 0.5) * dx) - field.kernel((d - 0.5) * dx))
    assert abs(total) <= 1e-14 * abs(field.kernel(0.0))


@given(st.lists(st.floats(0, 1), min_size=10, max_size=10))
def test_total_self_force_vanishes(rho):
    sp = SpatialGrid(20.0, 10)
    rho = np.array(rho)
    F = VlasovField(1.0, 6.0).force(rho, sp)
    scale = np.sum(rho * np.abs(F)) * sp.dx
    assert abs(np.sum(rho * F) * sp.dx) <= 1e-12 * scale + 1e-300
    assert np.allclose(F, -VlasovField(1.0, 6.0).force(rho[::-1], sp)[::-1], rtol=1e-12, atol=1e-15)


def test_uniform_slab_pulled_inward():
    sp = SpatialGrid(20.0, 10)
    F = VlasovField(1.0, 6.0).force(np.ones(10), sp)
    assert F[0] > 0 and F[-1] < 0


def _oracle_force(field, rho, sp, k, h=1e-4):
    """-dV/dx at the centre of cell k, V from a direct 3D convolution."""
    def plane(s):
        # integral of Phi over the plane at normal separation s
        val, _ = integrate.quad(lambda r: 2 * np.pi * r * field.phi(np.hypot(s, r)), 0, np.inf,
                                points=None, limit=200)
        return val

    def potential(x):
        total = 0.0
        for j, rj in enumerate(rho):
            if rj == 0:
                continue
            lo, hi = j * sp.dx, (j + 1) * sp.dx
            pts = [p for p in (x - field.sigma, x, x + field.sigma) if lo < p < hi]
            val, _ = integrate.quad(lambda y: plane(x - y), lo, hi, points=pts or None)
            total += rj * val
        return total
    x = sp.centers[k]
    return -(potential(x + h) - potential(x - h)) / (2 * h)


def test_two_bumps_attract():
    sp = SpatialGrid(12.0, 8)
    rho = np.zeros(8)
    rho[1], rho[5] = 1.0, 0.7
    field = VlasovField(1.0, 6.0)
    F = field.force(rho, sp)
    assert F[1] > 0 and F[5] < 0
    for k in (1, 3, 5):
        want = _oracle_force(field, rho, sp, k)
        assert np.sign(F[k]) == np.sign(want)
        assert F[k] == pytest.approx(want, rel=1e-5)


def _run(dt, steps, f0, ws):
    st_ = SimulationState(f0.copy())
    stepper = Stepper(ws, *_walls(ws.velocity), dt)
    for _ in range(steps):
        st_ = stepper.step(st_)
    return st_.f


def test_splitting_first_order():
    sp = SpatialGrid(8.0, 4)
    vg = build_velocity_grid(5.0, 6)
    f0 = smooth_state(sp, vg, np.random.default_rng(2), rho0=0.3)
    ws = _workspace(sp, vg, 2, sigma=0.5)
    dt = cfl_dt(sp, vg, 0.8)
    u = [_run(dt / 2 ** k, 2 ** k * 2, f0, ws) for k in range(3)]
    e1 = np.abs(u[0] - u[1]).sum()
    e2 = np.abs(u[1] - u[2]).sum()
    assert 1.6 < e1 / e2 < 2.6


def test_stepper_conserves_mass_and_aborts_on_nan():
    sp = SpatialGrid(8.0, 4)
    f0 = smooth_state(sp, VG, np.random.default_rng(3))
    ws = _workspace(sp, VG, 2, sigma=0.5)
    f = _run(cfl_dt(sp, VG, 0.9), 5, f0, ws)
    assert f.sum() == pytest.approx(f0.sum(), rel=1e-13)
    bad = f0.copy()
    bad[1, 3] = np.nan
    from enskog.dynamics import NumericalAbort
    with pytest.raises(NumericalAbort):
        _run(0.1, 1, bad, ws)


def test_linear_growth_guard():
    sp = SpatialGrid(16.0, 4)
    ws = _workspace(sp, VG, 2, sigma=1.0)
    dt = cfl_dt(sp, VG, 0.9)
    assert linear_growth(ws, dt, 0.0118, 1.0, iters=15) <= 1.0 + 1e-6
    mc = collision.CollisionWorkspace(sp, VG, ws.sphere, ws.model, 1.0, 1.0, 1.0,
                                      mode="mc", samples=2, seed=0)
    bad = collision.workspace_samples(mc)
    assert linear_growth(mc, 40 * dt, 0.0118, 1.0, samples=bad, iters=15) > 1.1
