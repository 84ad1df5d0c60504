"""Modified Enskog collision operator on the slab phase grid.

Off-grid velocities are handled by trilinear interpolation of ``f / M_ref``,
where ``M_ref`` is the (unnormalized) Maxwellian built from each cell's own
velocity and temperature. Any local Maxwellian is therefore interpolated
exactly and the discrete operator annihilates global equilibrium to rounding.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import os

import numba as nb
import numpy as np

# the default layer probes TBB first and warns about old versions; OpenMP is
# present with every numba wheel and the kernel has no nested parallelism
if "NUMBA_THREADING_LAYER" not in os.environ:
    nb.config.THREADING_LAYER = "omp"

from .correlation import CorrelationModel
from .phase_grid import SphereQuadrature, SpatialGrid, VelocityGrid, interp_weights

FULL = "full"
MC = "mc"


@dataclass(frozen=True)
class CollisionWorkspace:
    space: SpatialGrid
    velocity: VelocityGrid
    sphere: SphereQuadrature
    model: CorrelationModel
    sigma: float
    mass: float
    gas_const: float
    mode: str = FULL
    samples: int = 32
    seed: int = 0
    sampler_temp: float = 0.0     # MC partner nodes ~ Maxwellian at this T; 0 = uniform

    def __post_init__(self):
        if not (self.sigma > 0 and self.mass > 0 and self.gas_const > 0):
            raise ValueError("sigma, mass and gas constant must be positive")
        if self.mode not in (FULL, MC):
            raise ValueError(f"unknown collision mode {self.mode!r}")
        if self.mode == MC and self.samples < 1:
            raise ValueError("MC mode needs at least one sample")

    @property
    def prefactor(self) -> float:
        return self.sigma ** 2 / self.mass


class CollisionWarning(UserWarning):
    pass


def post_collision(xi, xi_star, alpha):
    """Return ``(xi', xi*', V_alpha)`` for hard-sphere kinematics."""
    xi = np.asarray(xi, dtype=float)
    xi_star = np.asarray(xi_star, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    va = np.sum((xi_star - xi) * alpha, axis=-1)
    return xi + va[..., None] * alpha, xi_star - va[..., None] * alpha, va


def reference_state(f, vgrid: VelocityGrid, gas_const: float, t_floor: float, iters: int = 4):
    """Per-cell (velocity, temperature) used as interpolation reference.

    The plain moments of a Maxwellian sampled on a truncated grid are biased at
    the 1e-8 level; the fixed-point correction below picks the Maxwellian whose
    discrete moments match those of ``f`` so sampled Maxwellians are reproduced
    to rounding.
    """
    w = vgrid.cell_volume
    rho = f.sum(axis=1) * w
    safe = np.where(rho > 0, rho, 1.0)
    v_f = (f @ vgrid.nodes) * w / safe[:, None]
    c2 = (f @ np.sum(vgrid.nodes ** 2, axis=1)) * w
    t_f = (c2 / safe - np.sum(v_f ** 2, axis=1)) / (3.0 * gas_const)
    vacuum = (rho <= 0) | ~np.isfinite(t_f) | (t_f <= t_floor)
    t_f = np.where(vacuum, t_floor, t_f)
    v_f[vacuum] = 0.0
    v, temp = v_f.copy(), t_f.copy()
    ax = vgrid.axis
    for _ in range(iters):
        rt = gas_const * temp
        g = np.exp(-(ax[None, None, :] - v[:, :, None]) ** 2 / (2.0 * rt[:, None, None]))
        z = g.sum(axis=2)
        mean = (g * ax).sum(axis=2) / z
        sq = (g * ax ** 2).sum(axis=2) / z
        t_d = (sq.sum(axis=1) - np.sum(mean ** 2, axis=1)) / (3.0 * gas_const)
        v = v + (v_f - mean)
        temp = np.maximum(temp + (t_f - t_d), t_floor)
    return v, temp


@nb.njit(cache=True)
def _axis_stencil(u, lo, h, n):
    r = (u - lo) / h
    if r <= 0.0:
        return 0, 0.0
    if r >= n - 1:
        return n - 2, 1.0
    i = int(r)
    if i > n - 2:
        i = n - 2
    return i, r - i


@nb.njit(cache=True)
def _f_at(h_cell, vref, inv2rt, ux, uy, uz, lo, dh, n):
    """f of one cell at an arbitrary velocity via the Maxwellian-referenced stencil."""
    i, tx = _axis_stencil(ux, lo, dh, n)
    j, ty = _axis_stencil(uy, lo, dh, n)
    k, tz = _axis_stencil(uz, lo, dh, n)
    nn = n * n
    b = i * nn + j * n + k
    c000 = h_cell[b]
    c001 = h_cell[b + 1]
    c010 = h_cell[b + n]
    c011 = h_cell[b + n + 1]
    c100 = h_cell[b + nn]
    c101 = h_cell[b + nn + 1]
    c110 = h_cell[b + nn + n]
    c111 = h_cell[b + nn + n + 1]
    c00 = c000 + tz * (c001 - c000)
    c01 = c010 + tz * (c011 - c010)
    c10 = c100 + tz * (c101 - c100)
    c11 = c110 + tz * (c111 - c110)
    c0 = c00 + ty * (c01 - c00)
    c1 = c10 + ty * (c11 - c10)
    hv = c0 + tx * (c1 - c0)
    dx = ux - vref[0]
    dy = uy - vref[1]
    dz = uz - vref[2]
    return hv * math.exp(-(dx * dx + dy * dy + dz * dz) * inv2rt)


@nb.njit(cache=True)
def _g_pair(gmode, eta_coef, rho, x0, dx, length, xa, xb):
    """Contact correlation for a pair at (xa, xb) along the slab normal."""
    n = rho.shape[0]
    if xa < 0.0 or xa > length or xb < 0.0 or xb > length:
        return 0.0
    if gmode == 0:
        return 1.0
    j0, j1, t, inside = interp_weights(0.5 * (xa + xb), x0, dx, n, length)
    eta = eta_coef * ((1.0 - t) * rho[j0] + t * rho[j1])
    return (1.0 - 0.5 * eta) / (1.0 - eta) ** 3


@nb.njit(cache=True, fastmath=True, parallel=True)
def _collide(h, f, vref, inv2rt, rho, gmode, eta_coef, x0, dx, length, sigma,
             nodes, lo, dh, nv, cells, star_idx, alphas, wts, flip, gain, loss):
    n_nodes = nodes.shape[0]
    n_cells = h.shape[0]
    shared = star_idx.shape[0] == 1
    n_samp = star_idx.shape[1]
    # every (cell, node) entry is written by exactly one iteration, so the
    # result does not depend on the thread count
    for flat in nb.prange(cells.shape[0] * n_nodes):
        k = cells[flat // n_nodes]
        a = flat % n_nodes
        xk = x0 + k * dx
        row = 0 if shared else a
        ax = nodes[a, 0]
        ay = nodes[a, 1]
        az = nodes[a, 2]
        fa = f[k, a]
        gsum = 0.0
        lsum = 0.0
        for s in range(n_samp):
            b = star_idx[row, s]
            e0 = alphas[row, s, 0]
            e1 = alphas[row, s, 1]
            e2 = alphas[row, s, 2]
            bx = nodes[b, 0]
            by = nodes[b, 1]
            bz = nodes[b, 2]
            va = (bx - ax) * e0 + (by - ay) * e1 + (bz - az) * e2
            if va <= 0.0:
                if not flip or va == 0.0:
                    continue
                e0 = -e0
                e1 = -e1
                e2 = -e2
                va = -va
            wv = wts[row, s] * va
            # gain: partner at X + sigma*alpha with post-collision velocities
            xp = xk + sigma * e0
            gp = _g_pair(gmode, eta_coef, rho, x0, dx, length, xp, xk)
            if gp > 0.0:
                j0, j1, t, inside = interp_weights(xp, x0, dx, n_cells, length)
                px = ax + va * e0
                py = ay + va * e1
                pz = az + va * e2
                qx = bx - va * e0
                qy = by - va * e1
                qz = bz - va * e2
                fp = _f_at(h[k], vref[k], inv2rt[k], px, py, pz, lo, dh, nv)
                fq = (1.0 - t) * _f_at(h[j0], vref[j0], inv2rt[j0], qx, qy, qz, lo, dh, nv)
                if t > 0.0:
                    fq += t * _f_at(h[j1], vref[j1], inv2rt[j1], qx, qy, qz, lo, dh, nv)
                gsum += wv * gp * fq * fp
            # loss: partner at X - sigma*alpha with pre-collision velocities
            xm = xk - sigma * e0
            gm = _g_pair(gmode, eta_coef, rho, x0, dx, length, xm, xk)
            if gm > 0.0 and fa != 0.0:
                j0, j1, t, inside = interp_weights(xm, x0, dx, n_cells, length)
                fb = (1.0 - t) * f[j0, b] + t * f[j1, b]
                lsum += wv * gm * fb * fa
        gain[k, a] = gsum
        loss[k, a] = lsum


class SampleSet:
    """Partner-node indices, directions and weights for one evaluation."""

    def __init__(self, star_idx, alphas, wts, flip):
        self.star_idx = np.ascontiguousarray(star_idx, dtype=np.int64)
        self.alphas = np.ascontiguousarray(alphas, dtype=float)
        self.wts = np.ascontiguousarray(wts, dtype=float)
        self.flip = bool(flip)


def full_samples(vgrid: VelocityGrid, sphere: SphereQuadrature) -> SampleSet:
    nb_, nq = vgrid.n_nodes, sphere.size
    idx = np.repeat(np.arange(nb_), nq)[None, :]
    alph = np.tile(sphere.directions, (nb_, 1))[None, :, :]
    w = (vgrid.cell_volume * np.tile(sphere.weights, nb_))[None, :]
    return SampleSet(idx, alph, w, flip=False)


def mc_samples(vgrid: VelocityGrid, samples: int, rng: np.random.Generator,
               temp: float = 0.0, gas_const: float = 1.0) -> SampleSet:
    """Random partner nodes and isotropic directions, one set per node.

    Partners are drawn uniformly over the grid, or with probability
    proportional to a Maxwellian at ``temp`` (importance sampling; the weight
    carries 1/p). Directions are flipped onto the approaching hemisphere
    inside the kernel, so every sample carries the half-sphere measure.
    """
    n = vgrid.n_nodes
    if temp > 0:
        p = np.exp(-np.sum(vgrid.nodes ** 2, axis=1) / (2 * gas_const * temp))
        p /= p.sum()
        idx = rng.choice(n, size=(n, samples), p=p)
        w = vgrid.cell_volume * 2.0 * np.pi / (samples * p[idx])
    else:
        idx = rng.integers(0, n, size=(n, samples))
        w = np.full((n, samples), vgrid.cell_volume * n * 2.0 * np.pi / samples)
    mu = rng.uniform(-1.0, 1.0, size=(n, samples))
    phi = rng.uniform(0.0, 2.0 * np.pi, size=(n, samples))
    s = np.sqrt(1.0 - mu ** 2)
    alph = np.stack([mu, s * np.cos(phi), s * np.sin(phi)], axis=-1)
    return SampleSet(idx, alph, w, flip=True)


def workspace_samples(ws: CollisionWorkspace, step: int = 0) -> SampleSet:
    """The MC sample set of ``ws`` for a given step."""
    return mc_samples(ws.velocity, ws.samples, step_rng(ws.seed, step), ws.sampler_temp,
                      ws.gas_const)


def step_rng(seed: int, step: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(step)])


def gain_loss(f, ws: CollisionWorkspace, samples: SampleSet | None = None,
              cells=None, step: int = 0):
    """Return ``(gain, loss)`` arrays of shape ``(n_cells, n_nodes)``."""
    f = np.ascontiguousarray(f, dtype=float)
    vg = ws.velocity
    if samples is None:
        if ws.mode == FULL:
            samples = full_samples(vg, ws.sphere)
        else:
            samples = workspace_samples(ws, step)
    n_cells = f.shape[0]
    if cells is None:
        cells = np.arange(n_cells)
    cells = np.asarray(cells, dtype=np.int64)
    vref, tref = reference_state(f, vg, ws.gas_const, t_floor=1e-3 * vg.xi_max ** 2 / ws.gas_const)
    mref = np.exp(-np.sum((vg.nodes[None, :, :] - vref[:, None, :]) ** 2, axis=2)
                  / (2.0 * ws.gas_const * tref[:, None]))
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(mref > 0, f / mref, 0.0)
    inv2rt = 1.0 / (2.0 * ws.gas_const * tref)
    rho = f.sum(axis=1) * vg.cell_volume
    gain = np.zeros_like(f)
    loss = np.zeros_like(f)
    gmode, eta_coef = ws.model.kernel_code()
    sp = ws.space
    _collide(np.ascontiguousarray(h), f, np.ascontiguousarray(vref), inv2rt, rho,
             gmode, eta_coef, 0.5 * sp.dx, sp.dx, sp.length, ws.sigma,
             vg.nodes, float(vg.axis[0]), vg.dxi, vg.n_per_axis, cells,
             samples.star_idx, samples.alphas, samples.wts, samples.flip, gain, loss)
    c = ws.prefactor
    return gain * c, loss * c


def gain(f, ws, **kw):
    return gain_loss(f, ws, **kw)[0]


def loss(f, ws, **kw):
    return gain_loss(f, ws, **kw)[1]


def project_mass(J, f, vgrid: VelocityGrid):
    """Remove each cell's mass defect in proportion to f; returns (J, defect)."""
    w = vgrid.cell_volume
    defect = J.sum(axis=1) * w
    mass = f.sum(axis=1) * w
    shift = np.where(mass > 0, defect / np.where(mass > 0, mass, 1.0), 0.0)
    return J - shift[:, None] * f, defect


def apply(f, ws: CollisionWorkspace, project: bool = True, step: int = 0,
          samples: SampleSet | None = None):
    """Collision term J = gain - loss, optionally mass-projected per cell."""
    g, l = gain_loss(f, ws, samples=samples, step=step)
    J = g - l
    if not project:
        return J
    scale = np.abs(J).max()
    J, defect = project_mass(J, f, ws.velocity)
    # at (near) equilibrium J is rounding noise and the ratio carries no information
    if scale > 1e-10 * np.abs(g).max():
        rel = np.max(np.abs(defect)) / (ws.velocity.cell_volume * ws.velocity.n_nodes * scale)
        if rel > 1e-2:
            warnings.warn(f"mass projection shift {rel:.2e} of max|J|; quadrature too coarse",
                          CollisionWarning, stacklevel=2)
    return J


def moment_of_J(J, vgrid: VelocityGrid, selector: str):
    """Per-cell moment of J for selector '1', 'xi_x', 'xi_y', 'xi_z' or 'energy'."""
    w = vgrid.cell_volume
    xi = vgrid.nodes
    if selector == "1":
        psi = np.ones(len(xi))
    elif selector in ("xi_x", "xi_y", "xi_z"):
        psi = xi[:, "xyz".index(selector[-1])]
    elif selector == "energy":
        psi = 0.5 * np.sum(xi ** 2, axis=1)
    else:
        raise ValueError(f"unknown moment selector {selector!r}")
    return (J @ psi) * w
