"""Measured functionals of a slab state: moments, collisional fluxes, H, F.

Pair integrals of the form sum_xi sum_xi* A(xi) B(xi*) P(u, u*) theta(u* - u),
with u = xi.alpha and P polynomial, are evaluated exactly on the grid by
sorting the projections along alpha and taking suffix sums. That is how the
collisional stress, heat flow and the surface forms of the energy and
momentum moments of J are computed without any velocity interpolation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .collision import CollisionWorkspace
from .correlation import CONTACT_CS, UNITY, g_cs, psi_cs
from .phase_grid import SpatialGrid, VelocityGrid, interp_weights

IDEAL = "ideal"
CS_SURROGATE = "cs_surrogate"
ORACLE = "config_oracle"
HC_MODES = (IDEAL, CS_SURROGATE, ORACLE)

# correlation model -> admissible collisional H
PAIRING = {UNITY: IDEAL, CONTACT_CS: CS_SURROGATE, "config_oracle": ORACLE}


def exact_rowsum(a):
    """Correctly rounded sums over the last axis (independent of term order)."""
    a = np.asarray(a, dtype=float)
    flat = a.reshape(-1, a.shape[-1])
    out = np.array([math.fsum(row) for row in flat])
    return out.reshape(a.shape[:-1])


@dataclass
class MomentSet:
    rho: np.ndarray
    v: np.ndarray
    temp: np.ndarray
    stress: np.ndarray   # kinetic p_ij, (n_cells, 3, 3)
    heat: np.ndarray     # kinetic q_i, (n_cells, 3)


def moments(f, vgrid: VelocityGrid, gas_const: float, t_vacuum: float = 1.0) -> MomentSet:
    """Hydrodynamic moments with order-independent reductions.

    Vacuum cells report v = 0 and T = ``t_vacuum``.
    """
    f = np.atleast_2d(np.asarray(f, dtype=float))
    w = vgrid.cell_volume
    xi = vgrid.nodes
    rho = exact_rowsum(f) * w
    occ = rho > 0
    safe = np.where(occ, rho, 1.0)
    mom = np.stack([exact_rowsum(f * xi[:, i]) for i in range(3)], axis=1) * w
    v = np.where(occ[:, None], mom / safe[:, None], 0.0)
    c = xi[None, :, :] - v[:, None, :]
    stress = np.empty((len(rho), 3, 3))
    for i in range(3):
        for j in range(i, 3):
            stress[:, i, j] = stress[:, j, i] = exact_rowsum(f * c[:, :, i] * c[:, :, j]) * w
    c2 = np.sum(c * c, axis=2)
    heat = np.stack([exact_rowsum(0.5 * f * c2 * c[:, :, i]) for i in range(3)], axis=1) * w
    trace = stress[:, 0, 0] + stress[:, 1, 1] + stress[:, 2, 2]
    temp = np.where(occ, trace / (3.0 * gas_const * safe), t_vacuum)
    return MomentSet(rho, v, temp, stress, heat)


# ---------------------------------------------------------------------------
# ordered pair sums

def _pair_moments(A, B, u, amax=3, bmax=3):
    """M[a, b] = sum_i A_i u_i^a sum_{j: u_j > u_i} B_j u_j^b over the last axis.

    Ties (u_j == u_i) may be included or not; callers only use polynomials
    that vanish at u* = u.
    """
    order = np.argsort(u, kind="stable")
    us = u[order]
    As = A[..., order]
    Bs = B[..., order]
    out = np.empty(A.shape[:-1] + (amax + 1, bmax + 1))
    for b in range(bmax + 1):
        t = np.cumsum((Bs * us ** b)[..., ::-1], axis=-1)[..., ::-1]
        tail = np.zeros_like(t)
        tail[..., :-1] = t[..., 1:]
        for a in range(amax + 1):
            out[..., a, b] = np.sum(As * us ** a * tail, axis=-1)
    return out


def _v2(M):
    """sum A B (u* - u)^2 theta."""
    return M[..., 0, 2] - 2.0 * M[..., 1, 1] + M[..., 2, 0]


def _sum_v2(M):
    """sum A B (u + u*)(u* - u)^2 theta."""
    return M[..., 0, 3] - M[..., 1, 2] - M[..., 2, 1] + M[..., 3, 0]


def _interp_rows(f, space: SpatialGrid, pts):
    """f (n_cells, n_nodes) at slab points with clipping; rows of zeros outside."""
    n = space.n_cells
    out = np.zeros((len(pts), f.shape[1]))
    for r, p in enumerate(pts):
        j0, j1, t, inside = interp_weights(p, 0.5 * space.dx, space.dx, n, space.length)
        if inside:
            out[r] = (1.0 - t) * f[j0] + t * f[j1]
    return out


def _g_at(ws: CollisionWorkspace, rho, xa, xb):
    xa = np.asarray(xa, dtype=float)
    xb = np.asarray(xb, dtype=float)
    L = ws.space.length
    inside = (xa >= 0) & (xa <= L) & (xb >= 0) & (xb <= L)
    if ws.model.kind == UNITY:
        return inside.astype(float)
    mid = 0.5 * (xa + xb)
    rho_mid = _interp_rows(rho[:, None], ws.space, np.atleast_1d(mid).ravel())[:, 0]
    eta = ws.model.eta_coef * rho_mid.reshape(mid.shape)
    return np.where(inside, g_cs(np.where(inside, eta, 0.0)), 0.0)


@dataclass
class CollisionalFluxes:
    x: np.ndarray
    stress: np.ndarray   # (n_pts, 3, 3)
    heat: np.ndarray     # (n_pts, 3)


def collisional_fluxes(f, ws: CollisionWorkspace, points=None, n_lambda: int = 8,
                       v=None) -> CollisionalFluxes:
    """Collisional stress and heat flow from the lambda-segment integrals.

    Midpoint rule over lambda in [0, sigma]; the pair at (X + lambda alpha,
    X + (lambda - sigma) alpha) is clipped to the slab by g. ``v`` is the flow
    velocity at the evaluation points (interpolated from cell moments by
    default) used to form peculiar velocities in the heat flow.
    """
    f = np.asarray(f, dtype=float)
    sp, vg, sph = ws.space, ws.velocity, ws.sphere
    x = sp.centers if points is None else np.atleast_1d(np.asarray(points, dtype=float))
    mom = moments(f, vg, ws.gas_const)
    if v is None:
        v = np.stack([_interp_rows(mom.v[:, i:i + 1], sp, x)[:, 0] for i in range(3)], axis=1)
    lam = (np.arange(n_lambda) + 0.5) * ws.sigma / n_lambda
    dlam = ws.sigma / n_lambda
    w2 = vg.cell_volume ** 2
    stress = np.zeros((len(x), 3, 3))
    heat = np.zeros((len(x), 3))
    for q in range(sph.size):
        al = sph.directions[q]
        u = vg.nodes @ al
        pa = (x[:, None] + lam[None, :] * al[0]).ravel()
        pb = (x[:, None] + (lam[None, :] - ws.sigma) * al[0]).ravel()
        g = _g_at(ws, mom.rho, pa, pb)
        keep = g > 0
        if not np.any(keep):
            continue
        A = _interp_rows(f, sp, pa[keep])
        B = _interp_rows(f, sp, pb[keep])
        M = _pair_moments(A, B, u)
        s2 = np.zeros(len(pa))
        s3 = np.zeros(len(pa))
        s2[keep] = g[keep] * _v2(M)
        s3[keep] = g[keep] * _sum_v2(M)
        s2 = s2.reshape(len(x), n_lambda).sum(axis=1) * dlam * w2
        s3 = s3.reshape(len(x), n_lambda).sum(axis=1) * dlam * w2
        wv = v @ al
        stress += sph.weights[q] * s2[:, None, None] * np.outer(al, al)[None]
        heat += sph.weights[q] * (s3 - 2.0 * wv * s2)[:, None] * al[None, :]
    pref = ws.sigma ** 2 / ws.mass
    return CollisionalFluxes(x, 0.5 * pref * stress, 0.25 * pref * heat)


def surface_moments(f, ws: CollisionWorkspace):
    """Momentum and energy moments of J per cell in their contact-surface form.

    Returns (momentum (n_cells, 3), energy (n_cells,)), using only
    pre-collision values of f at grid velocities.
    """
    f = np.asarray(f, dtype=float)
    sp, vg, sph = ws.space, ws.velocity, ws.sphere
    x = sp.centers
    rho = f.sum(axis=1) * vg.cell_volume
    mom = np.zeros((len(x), 3))
    en = np.zeros(len(x))
    w2 = vg.cell_volume ** 2
    for q in range(sph.size):
        al = sph.directions[q]
        u = vg.nodes @ al
        xp = x + ws.sigma * al[0]
        g = _g_at(ws, rho, xp, x)
        keep = g > 0
        if not np.any(keep):
            continue
        A = _interp_rows(f, sp, xp[keep])   # f at X + sigma alpha, velocity xi
        B = f[keep]                          # f_* at X
        M = _pair_moments(A, B, u)
        s2 = np.zeros(len(x))
        s3 = np.zeros(len(x))
        s2[keep] = g[keep] * _v2(M)
        s3[keep] = g[keep] * _sum_v2(M)
        mom -= sph.weights[q] * s2[:, None] * al[None, :] * w2
        en -= 0.5 * sph.weights[q] * s3 * w2
    pref = ws.sigma ** 2 / ws.mass
    return pref * mom, pref * en


def exchange_identity(f, ws: CollisionWorkspace, gain, component: int = 0):
    """Both sides of  int phi J^G = int phi' J^L  for phi = xi_component, per cell.

    ``gain`` is the gain term from the collision operator. The right side is
    evaluated exactly on the grid (pre-collision values only).
    """
    f = np.asarray(f, dtype=float)
    sp, vg, sph = ws.space, ws.velocity, ws.sphere
    x = sp.centers
    rho = f.sum(axis=1) * vg.cell_volume
    xi_c = vg.nodes[:, component]
    lhs = (gain @ xi_c) * vg.cell_volume
    rhs = np.zeros(len(x))
    w2 = vg.cell_volume ** 2
    for q in range(sph.size):
        al = sph.directions[q]
        # loss partner sits at X - sigma alpha with velocity xi_*; V = (xi_* - xi).alpha
        u = vg.nodes @ al
        xm = x - ws.sigma * al[0]
        g = _g_at(ws, rho, xm, x)
        keep = g > 0
        if not np.any(keep):
            continue
        A = f[keep]
        B = _interp_rows(f, sp, xm[keep])
        M1 = _pair_moments(A * xi_c, B, u, amax=1, bmax=1)
        M = _pair_moments(A, B, u, amax=2, bmax=2)
        first = M1[..., 0, 1] - M1[..., 1, 0]          # sum phi(xi) V theta
        second = al[component] * _v2(M)                # sum alpha_c V^2 theta
        contrib = np.zeros(len(x))
        contrib[keep] = g[keep] * (first + second)
        rhs += sph.weights[q] * contrib * w2
    pref = ws.sigma ** 2 / ws.mass
    return lhs, pref * rhs


@dataclass
class Lemma1Residuals:
    momentum: np.ndarray        # domain integral of xi J
    energy: float               # domain integral of xi^2/2 J
    momentum_surface: np.ndarray
    energy_surface: float
    wall_stress: np.ndarray     # p^(c) at x=0 and x=L
    wall_heat: np.ndarray       # q^(c) at x=0 and x=L


def lemma1_residuals(J, f, ws: CollisionWorkspace, surface: bool = True) -> Lemma1Residuals:
    vg, sp = ws.velocity, ws.space
    xi = vg.nodes
    w = vg.cell_volume * sp.dx
    mom = np.array([np.sum(J @ xi[:, i]) for i in range(3)]) * w
    en = float(np.sum(J @ (0.5 * np.sum(xi ** 2, axis=1)))) * w
    if surface:
        m_s, e_s = surface_moments(f, ws)
        mom_s = m_s.sum(axis=0) * sp.dx
        en_s = float(e_s.sum() * sp.dx)
        walls = collisional_fluxes(f, ws, points=[0.0, sp.length],
                                   v=np.zeros((2, 3)))
        return Lemma1Residuals(mom, en, mom_s, en_s, walls.stress, walls.heat)
    nan = np.full(3, np.nan)
    return Lemma1Residuals(mom, en, nan, np.nan, np.zeros((2, 3, 3)), np.zeros((2, 3)))


# ---------------------------------------------------------------------------
# H functions and free energy

def _xlogx(f, ref=None):
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    pos = f > 0
    if ref is None:
        out[pos] = f[pos] * np.log(f[pos])
    else:
        ref = np.broadcast_to(ref, f.shape)
        out[pos] = f[pos] * np.log(f[pos] / ref[pos])
    return out


def h_kinetic(f, vgrid: VelocityGrid, space: SpatialGrid) -> float:
    """sum f ln f over phase space (per unit wall area), reference density 1."""
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("negative distribution")
    return float(np.sum(_xlogx(f)) * vgrid.cell_volume * space.dx)


def wall_maxwellian(vgrid: VelocityGrid, t_wall: float, gas_const: float) -> np.ndarray:
    from .phase_grid import maxwellian
    return maxwellian(vgrid.nodes, 1.0, np.zeros(3), t_wall, gas_const)


def relative_entropy(f, vgrid: VelocityGrid, space: SpatialGrid, t_wall: float,
                     gas_const: float) -> float:
    """sum f ln(f/f_w) with f_w the unit-density Maxwellian at the wall temperature."""
    fw = wall_maxwellian(vgrid, t_wall, gas_const)
    return float(np.sum(_xlogx(f, fw[None, :])) * vgrid.cell_volume * space.dx)


def h_collisional(rho, space: SpatialGrid, mode: str, sigma: float = 0.0,
                  mass: float = 1.0, state=None) -> float:
    """Collisional part of H per unit wall area.

    ideal: -M ln M with M the total mass (w proportional to rho, gauge int w = 1).
    cs_surrogate: + int rho psi_CS(eta) dx, the Carnahan-Starling excess; not
    the exact configurational functional and only used as a labeled surrogate.
    config_oracle: taken from a converged ConfigState (box-integrated).
    """
    rho = np.asarray(rho, dtype=float)
    if mode == IDEAL:
        total = math.fsum(rho) * space.dx
        return float(-total * np.log(total)) if total > 0 else 0.0
    if mode == CS_SURROGATE:
        eta = np.pi * sigma ** 3 * rho / (6.0 * mass)
        return float(np.sum(rho * psi_cs(eta)) * space.dx)
    if mode == ORACLE:
        if state is None:
            raise ValueError("oracle H needs a ConfigState")
        return state.h_collisional()
    raise ValueError(f"unknown collisional H mode {mode!r}")


def check_pairing(correlation_kind: str, hc_mode: str):
    want = PAIRING.get(correlation_kind)
    if want != hc_mode:
        raise ValueError(f"correlation {correlation_kind!r} must be paired with collisional H "
                         f"{want!r}, got {hc_mode!r}; monotonicity only holds for a consistent pair")


def total_energy(f, vgrid: VelocityGrid, space: SpatialGrid) -> float:
    return float(np.sum(f @ (0.5 * np.sum(vgrid.nodes ** 2, axis=1))) * vgrid.cell_volume * space.dx)


def free_energy(f, vgrid: VelocityGrid, space: SpatialGrid, t_wall: float, gas_const: float,
                h_c: float, potential: float = 0.0):
    """(F, F') with F = R T_w (sum f ln(f/f_w) + H_c) and F' = F + potential energy."""
    F = gas_const * t_wall * (relative_entropy(f, vgrid, space, t_wall, gas_const) + h_c)
    return F, F + potential
