"""Property suites run by ``enskog verify``.

Each suite returns a report: a list of checks, each with the measured value,
its tolerance and a verdict. ``resolution`` scales the grids or sample
counts; 1 is the quick desk-scale setting.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .boundary import CL, DIFFUSE, MAXWELL, WallKernel, build_wall, dg_boundary_flux
from .collision import CollisionWorkspace, gain_loss, moment_of_J, reference_state
from .correlation import (Box, CorrelationModel, WeightField, config_phi, config_Y, exact_g2,
                          g_cs, invert_density_to_w, verify_reduction_identity)
from .diagnostics import (collisional_fluxes, exchange_identity, lemma1_residuals,
                          surface_moments)
from .phase_grid import SpatialGrid, build_sphere_quadrature, build_velocity_grid, maxwellian

SUITES = ("identities", "boundary", "correlation", "fluxes")


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    informational: bool = False   # reported, never fails the suite
    inputs: dict = field(default_factory=dict)


@dataclass
class Report:
    suite: str
    resolution: int
    checks: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed or c.informational for c in self.checks)

    def add(self, name, value, tol, passed=None, informational=False, **inputs):
        value = float(value)
        ok = bool(value <= tol) if passed is None else bool(passed)
        self.checks.append(Check(name, value, float(tol), ok, informational, inputs))

    def to_dict(self) -> dict:
        return {"suite": self.suite, "resolution": self.resolution, "passed": self.passed,
                "seconds": self.seconds, "checks": [asdict(c) for c in self.checks]}


# ---------------------------------------------------------------------------
# smooth random test states

def smooth_state(space: SpatialGrid, vgrid, rng, gas_const=1.0, rho0=0.05, skew=0.2):
    """Local Maxwellian with random low-mode rho, v, T times a smooth non-Maxwellian factor."""
    x = space.centers / space.length
    modes = np.stack([np.sin(np.pi * (k + 1) * x) for k in range(3)])

    def field_(scale):
        return scale * (rng.uniform(-1, 1, 3) @ modes) / 3

    # amplitudes kept small enough that the coarsest grid (N_v = 6) still
    # resolves the local thermal width
    rho = rho0 * (1 + field_(1.5))
    v = np.stack([field_(0.3), field_(0.15), field_(0.15)], axis=1)
    temp = 1 + field_(0.25)
    f = maxwellian(vgrid.nodes, rho, v, temp, gas_const)
    c = rng.uniform(-1, 1, 3)
    xi = vgrid.nodes / math.sqrt(gas_const)
    return f * (1 + skew * np.tanh((c[0] * xi[:, 0] * xi[:, 1] + c[1] * xi[:, 0] ** 3 / 3
                                    + c[2] * xi[:, 2]) / 3))


def _workspace(space, vgrid, order, sigma=1.0, model=None, mode="full"):
    return CollisionWorkspace(space, vgrid, build_sphere_quadrature(order),
                              model or CorrelationModel(), sigma=sigma, mass=1.0,
                              gas_const=1.0, mode=mode)


def interpolation_tolerance(f, vgrid, weight, gas_const=1.0):
    """A-priori error of the off-grid velocity evaluation, as a fraction of int weight f.

    The collision operator interpolates h = f / M_ref trilinearly; the error is
    bounded by dxi^2/8 sum_axes |d2h/dxi_i^2|, estimated by second differences.
    Largest value over cells.
    """
    vref, tref = reference_state(f, vgrid, gas_const, t_floor=1e-3 * vgrid.xi_max ** 2 / gas_const)
    n = vgrid.n_per_axis
    weight = np.abs(weight).reshape(n, n, n)
    worst = 0.0
    for k in range(f.shape[0]):
        m = np.exp(-np.sum((vgrid.nodes - vref[k]) ** 2, axis=1) / (2 * gas_const * tref[k]))
        h = (f[k] / m).reshape(n, n, n)
        d2 = np.zeros_like(h)
        for ax in range(3):
            hh = np.moveaxis(h, ax, 0)
            dd = np.zeros_like(hh)
            dd[1:-1] = np.abs(hh[2:] - 2 * hh[1:-1] + hh[:-2])
            dd[0], dd[-1] = dd[1], dd[-2]
            d2 += np.moveaxis(dd, 0, ax)
        den = np.sum(f[k].reshape(n, n, n) * weight)
        if den > 0:
            worst = max(worst, float(np.sum(d2 / 8 * m.reshape(n, n, n) * weight) / den))
    return worst


@dataclass
class IdentityResiduals:
    exchange: float           # |int xi_x G - contact form| / max int |xi_x| G
    energy: float             # |int xi^2/2 J - surface form| / max int xi^2/2 G
    exchange_tol: float
    energy_tol: float


def identity_residuals(n_v: int, order: int = 6, seed: int = 0, sigma: float = 1.0):
    """Moment-exchange identity (phi = xi_x) and contact-surface energy form on a
    smooth random state, with the interpolation tolerance of the same grid."""
    sp = SpatialGrid(8.0, 8)
    vg = build_velocity_grid(5.0 * math.sqrt(1.3), n_v)
    f = smooth_state(sp, vg, np.random.default_rng(seed))
    ws = _workspace(sp, vg, order, sigma)
    G, L = gain_loss(f, ws)
    lhs, rhs = exchange_identity(f, ws, G)
    xi_x = vg.nodes[:, 0]
    scale_m = (np.abs(G) @ np.abs(xi_x)).max() * vg.cell_volume
    _, e_surf = surface_moments(f, ws)
    e_dir = moment_of_J(G - L, vg, "energy")
    e2 = 0.5 * np.sum(vg.nodes ** 2, axis=1)
    scale_e = (np.abs(G) @ e2).max() * vg.cell_volume
    return IdentityResiduals(float(np.abs(lhs - rhs).max() / scale_m),
                             float(np.abs(e_dir - e_surf).max() / scale_e),
                             interpolation_tolerance(f, vg, xi_x),
                             interpolation_tolerance(f, vg, e2))


def lemma1_study(orders=(2, 4, 8), n_v=8, seed=0, sigma=1.5):
    """Domain-integrated momentum and energy of J and wall collisional fluxes
    for a sequence of sphere orders, on one smooth random state."""
    sp = SpatialGrid(8.0, 8)
    vg = build_velocity_grid(5.0 * math.sqrt(1.3), n_v)
    f = smooth_state(sp, vg, np.random.default_rng(seed))
    rows = []
    for order in orders:
        ws = _workspace(sp, vg, order, sigma)
        G, L = gain_loss(f, ws)
        res = lemma1_residuals(G - L, f, ws, surface=False)
        walls = collisional_fluxes(f, ws, points=[0.0, sp.length], v=np.zeros((2, 3)))
        rows.append({"order": order, "momentum_x": float(res.momentum[0]),
                     "energy": float(res.energy),
                     "wall_stress": float(np.abs(walls.stress).max()),
                     "wall_heat": float(np.abs(walls.heat).max())})
    return rows


def suite_identities(resolution: int = 1, seed: int = 0) -> Report:
    rep = Report("identities", resolution)
    n_v = 6 + 2 * (resolution - 1)
    r = identity_residuals(n_v, 6, seed)
    r2 = identity_residuals(n_v + 2, 6, seed)
    rep.add("exchange_identity_residual", r.exchange, r.exchange_tol, n_v=n_v, order=6)
    rep.add("energy_surface_form_residual", r.energy, r.energy_tol, n_v=n_v, order=6)
    for name, a, b in (("exchange_identity", r.exchange, r2.exchange),
                       ("energy_surface_form", r.energy, r2.energy)):
        rep.add(f"{name}_shrinks", b / a, 1.0, passed=b < a, n_v=[n_v, n_v + 2],
                coarse=a, fine=b)
    # equilibrium is annihilated to rounding
    sp = SpatialGrid(8.0, 8)
    vg = build_velocity_grid(5.0, n_v + 2)
    f = maxwellian(vg.nodes, np.full(8, 0.1), np.zeros((8, 3)), np.ones(8), 1.0)
    ws = _workspace(sp, vg, 6, sigma=0.4)
    G, L = gain_loss(f, ws)
    rep.add("equilibrium_J", np.abs(G - L).max() / np.abs(G).max(), 1e-12)
    rows = lemma1_study(n_v=n_v + 2, seed=seed)
    walls = max(max(r["wall_stress"], r["wall_heat"]) for r in rows)
    rep.add("wall_collisional_fluxes", walls, 0.0)
    for a, b in zip(rows, rows[1:]):
        for key in ("momentum_x", "energy"):
            ratio = abs(a[key]) / max(abs(b[key]), 1e-300)
            rep.add(f"lemma1_{key}_ratio_order{a['order']}_to_{b['order']}", ratio, 2.0,
                    passed=ratio >= 2.0, informational=True,
                    before=a[key], after=b[key])
    return rep


def random_wall_states(op, rng, n=100):
    fw = op.f_wall
    for _ in range(n):
        yield op.reflect(fw * rng.uniform(0.1, 3.0) * np.exp(rng.normal(size=fw.size)))


def wall_kernels():
    return [WallKernel(DIFFUSE), WallKernel(MAXWELL, accommodation=0.5),
            WallKernel(CL, alpha_n=0.8, alpha_t=0.9)]


def suite_boundary(resolution: int = 1, seed: int = 0) -> Report:
    rep = Report("boundary", resolution)
    vg = build_velocity_grid(6.0, 8 + 4 * resolution)
    rng = np.random.default_rng(seed)
    for kern in wall_kernels():
        for normal in (1, -1):
            k = WallKernel(kern.kind, kern.t_wall, kern.accommodation, kern.alpha_n,
                           kern.alpha_t, normal)
            op = build_wall(k, vg, 1.0)
            tag = f"{k.kind}_{'left' if normal > 0 else 'right'}"
            rep.add(f"{tag}_normalization", op.normalization_error().max(), 1e-6)
            worst = max(dg_boundary_flux(s, vg, 1.0, 1.0, normal)
                        for s in random_wall_states(op, rng))
            rep.add(f"{tag}_dg_flux_max", worst, 1e-10, states=100)
            eq = dg_boundary_flux(op.reflect(op.f_wall), vg, 1.0, 1.0, normal)
            rep.add(f"{tag}_dg_flux_equilibrium", abs(eq), 1e-8)
    return rep


def box_overlap_probability(lengths, periodic, sigma):
    """Probability that two uniform points in the box are closer than sigma
    (sigma below half of every side)."""
    walled = [a for a, p in zip(lengths, periodic) if not p]
    v = float(np.prod(lengths))
    s = 4 * np.pi * sigma ** 3 / 3
    s -= np.pi * sigma ** 4 / 2 * sum(1 / a for a in walled)
    s += 8 * sigma ** 5 / 15 * sum(1 / (walled[i] * walled[j])
                                   for i in range(len(walled)) for j in range(i + 1, len(walled)))
    if len(walled) == 3:
        s -= sigma ** 6 / (6 * np.prod(walled))
    return s / v


def suite_correlation(resolution: int = 1, seed: int = 0) -> Report:
    rep = Report("correlation", resolution)
    box = Box((4.0, 4.0, 4.0))
    w = WeightField.uniform(box, 8)
    x, y = [1.0, 2.0, 2.0], [3.0, 2.0, 2.0]
    samples = 20000 * resolution
    for n in (2, 3, 5):
        est = exact_g2(w, n, 0.0, x, y, samples=2000, seed=seed + n)
        # sigma = 0: every indicator is one, the estimate is exact and its SE is zero
        rep.add(f"ideal_limit_N{n}", abs(est.estimate - (n - 1) / n), 3 * est.std_error + 1e-14,
                estimate=est.estimate, std_error=est.std_error)
    # two particles: exact phi and Y at points away from the walls
    sigma = 0.8
    p = box_overlap_probability(box.lengths, box.periodic, sigma)
    phi = 1 - p
    y_exact = 1 - 4 * np.pi * sigma ** 3 / (3 * box.volume)
    g = exact_g2(w, 2, sigma, [1.5, 2.0, 2.0], [2.5, 2.0, 2.0], samples=10 * samples, seed=seed + 20)
    closed = phi / (2 * y_exact * y_exact)
    rep.add("two_particle_closed_form", abs(g.estimate - closed) / (3 * g.std_error), 1.0,
            estimate=g.estimate, std_error=g.std_error, closed_form=closed)
    ph = config_phi(w, 2, sigma, samples=10 * samples, seed=seed + 21)
    rep.add("two_particle_phi", abs(ph.estimate - phi) / (3 * ph.std_error), 1.0,
            estimate=ph.estimate, std_error=ph.std_error, closed_form=phi)
    yy = config_Y(w, 2, sigma, [2.0, 2.0, 2.0], samples=10 * samples, seed=seed + 22)
    rep.add("two_particle_Y", abs(yy.estimate - y_exact) / (3 * yy.std_error), 1.0,
            estimate=yy.estimate, std_error=yy.std_error, closed_form=y_exact)
    # reduction identity on a smooth ramp, three particles
    rho = ramp_density(box, 3, 1.0)
    st = invert_density_to_w(rho, box, 3, sigma, 1.0, tol=1e-8, samples=samples, seed=seed + 30)
    rep.add("inversion_residual", st.residual, 1e-6, iterations=st.iterations)
    r = verify_reduction_identity(st, 1.5, samples=200000 * resolution, seed=seed + 31)
    rep.add("reduction_identity", abs(r.residual) / (3 * r.combined_se), 1.0,
            lhs=r.lhs, rhs=r.rhs, combined_se=r.combined_se)
    return rep


def ramp_density(box: Box, n: int, mass: float, bins: int = 16, slope: float = 0.5):
    lx = box.lengths[0]
    x = (np.arange(bins) + 0.5) * lx / bins
    rho = 1 + slope * (x - lx / 2) / (lx / 2)
    return rho * mass * n / (rho.sum() * lx / bins * box.area)


def pressure_oracle(rho, temp, sigma, mass, g, gas_const=1.0):
    """Collisional stress of a uniform equilibrium, mass-based f:
    (2 pi sigma^3 / (3 m)) g rho^2 R T."""
    return 2 * np.pi * sigma ** 3 / (3 * mass) * g * rho ** 2 * gas_const * temp


def suite_fluxes(resolution: int = 1, seed: int = 0) -> Report:
    rep = Report("fluxes", resolution)
    sp = SpatialGrid(8.0, 8)
    vg = build_velocity_grid(6.0, 8 + 4 * resolution)
    rho, temp = 0.3, 1.0
    f = maxwellian(vg.nodes, np.full(8, rho), np.zeros((8, 3)), np.full(8, temp), 1.0)
    for model in (CorrelationModel(), CorrelationModel("contact_cs", sigma=1.0, mass=1.0)):
        ws = _workspace(sp, vg, 4 + 2 * resolution, model=model)
        cf = collisional_fluxes(f, ws, points=[4.0, 0.0, 8.0])
        g = 1.0 if model.kind == "unity" else g_cs(np.pi * rho / 6)
        want = pressure_oracle(rho, temp, 1.0, 1.0, g)
        diag = np.diag(cf.stress[0])
        rep.add(f"{model.kind}_pressure_rel_error", np.abs(diag / want - 1).max(), 0.02,
                oracle=want, measured=diag.tolist())
        off = np.abs(cf.stress[0] - np.diag(diag)).max() / np.abs(diag).max()
        rep.add(f"{model.kind}_off_diagonal", off, 1e-3)
        rep.add(f"{model.kind}_wall_stress", np.abs(cf.stress[1:]).max(), 0.0)
        rep.add(f"{model.kind}_wall_heat", np.abs(cf.heat[1:]).max(), 0.0)
    return rep


def run_suite(name: str, resolution: int = 1, seed: int = 0) -> Report:
    fn = {"identities": suite_identities, "boundary": suite_boundary,
          "correlation": suite_correlation, "fluxes": suite_fluxes}.get(name)
    if fn is None:
        raise KeyError(f"unknown suite {name!r}; choose from {SUITES}")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    t0 = time.time()
    rep = fn(resolution, seed)
    rep.seconds = time.time() - t0
    return rep
