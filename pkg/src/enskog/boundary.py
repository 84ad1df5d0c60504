"""Heat-bath wall kernels on the discrete velocity grid and the wall entropy flux.

Every kernel is stored as a reflection operator acting on the impinging half
of the grid. ``reflect`` returns the full-range wall state: impinging nodes
keep the incoming values and reflected nodes carry the re-emitted
distribution. For Cercignani-Lampis the discretized kernel is balanced
(Sinkhorn) so that both zero net mass flux and reproduction of the wall
Maxwellian hold to rounding on the grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import i0e

from .phase_grid import VelocityGrid, maxwellian

DIFFUSE = "diffuse"
MAXWELL = "maxwell"
CL = "cercignani_lampis"
WALL_KINDS = (DIFFUSE, MAXWELL, CL)


@dataclass(frozen=True)
class WallKernel:
    kind: str = DIFFUSE
    t_wall: float = 1.0
    accommodation: float = 1.0
    alpha_n: float = 1.0
    alpha_t: float = 1.0
    normal: int = 1  # inward normal along x: +1 at x=0, -1 at x=L

    def __post_init__(self):
        if self.kind not in WALL_KINDS:
            raise ValueError(f"unknown wall kernel {self.kind!r}")
        if not self.t_wall > 0:
            raise ValueError("wall temperature must be positive")
        if self.normal not in (1, -1):
            raise ValueError("normal must be +1 or -1")
        if self.kind == MAXWELL and not 0 < self.accommodation <= 1:
            raise ValueError("Maxwell accommodation must lie in (0, 1]; a = 0 is pure "
                             "specular reflection, which does not single out the wall Maxwellian")
        if self.kind == CL:
            if not 0 < self.alpha_n <= 1:
                raise ValueError("CL alpha_n must lie in (0, 1]")
            if not 0 < self.alpha_t < 2:
                raise ValueError("CL alpha_t must lie in (0, 2)")


@dataclass
class WallOperator:
    kernel: WallKernel
    vgrid: VelocityGrid
    gas_const: float
    incoming: np.ndarray = field(repr=False)   # impinging nodes, xi.n < 0
    outgoing: np.ndarray = field(repr=False)   # re-emitted nodes, xi.n > 0
    mirror: np.ndarray = field(repr=False)     # specular partner of each re-emitted node
    f_wall: np.ndarray = field(repr=False)     # unit-density wall Maxwellian on all nodes
    flux_matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def speed_in(self) -> np.ndarray:
        return np.abs(self.vgrid.nodes[self.incoming, 0])

    @property
    def speed_out(self) -> np.ndarray:
        return np.abs(self.vgrid.nodes[self.outgoing, 0])

    def transfer(self) -> np.ndarray:
        """Flux transfer matrix P[n, m]: outgoing-node flux produced per unit
        impinging flux at node m. Columns sum to one (impermeability)."""
        n_out, n_in = len(self.outgoing), len(self.incoming)
        k = self.kernel
        if k.kind == CL:
            return self.flux_matrix
        phi_w = self.speed_out * self.f_wall[self.outgoing]
        diff = np.outer(phi_w / phi_w.sum(), np.ones(n_in))
        if k.kind == DIFFUSE:
            return diff
        specular = np.zeros((n_out, n_in))
        pos = {node: i for i, node in enumerate(self.incoming)}
        for r, node in enumerate(self.mirror):
            specular[r, pos[node]] = 1.0
        a = k.accommodation
        return a * diff + (1 - a) * specular

    def reflect(self, f_wall_face: np.ndarray) -> np.ndarray:
        """Full-range wall state from the impinging half of ``f_wall_face``.

        Works on a single node vector or a stack (..., n_nodes).
        """
        f = np.asarray(f_wall_face, dtype=float)
        f_in = f[..., self.incoming]
        if np.any(f_in < 0):
            raise ValueError("negative impinging distribution")
        w = self.vgrid.cell_volume
        flux_in = f_in * self.speed_in * w
        out = f.copy()
        k = self.kernel
        if k.kind == CL:
            flux_out = flux_in @ self.flux_matrix.T
            out[..., self.outgoing] = flux_out / (self.speed_out * w)
            return out
        phi_w = self.speed_out * self.f_wall[self.outgoing] * w
        total = flux_in.sum(axis=-1, keepdims=True)
        diffuse = total * self.f_wall[self.outgoing] / phi_w.sum()
        if k.kind == DIFFUSE:
            out[..., self.outgoing] = diffuse
        else:
            a = k.accommodation
            out[..., self.outgoing] = a * diffuse + (1 - a) * f[..., self.mirror]
        return out

    def net_mass_flux(self, state: np.ndarray) -> np.ndarray:
        """Net mass flux into the gas through the wall for a full wall state."""
        xn = self.vgrid.nodes[:, 0] * self.kernel.normal
        return (np.asarray(state) @ xn) * self.vgrid.cell_volume

    def normalization_error(self) -> np.ndarray:
        """Per impinging node |sum_out |xi.n/xi*.n| K w - 1|."""
        return np.abs(self.transfer().sum(axis=0) - 1.0)


def _cl_density(u_out, t_out, u_in, t_in, a_n, a_t):
    """Cercignani-Lampis reflection density in velocities scaled by sqrt(2RT_w).

    u are normal speeds (positive), t tangential 2-vectors.
    """
    z = 2.0 * np.sqrt(1.0 - a_n) * np.outer(u_out, u_in) / a_n
    # exp(-(u^2 + (1-a_n) u*^2)/a_n) I0(z) written stably through i0e
    expo = -(u_out[:, None] ** 2 + (1.0 - a_n) * u_in[None, :] ** 2) / a_n + z
    normal = (2.0 * u_out[:, None] / a_n) * i0e(z) * np.exp(expo)
    shift = t_out[:, None, :] - (1.0 - a_t) * t_in[None, :, :]
    tang = np.exp(-np.sum(shift ** 2, axis=-1) / (a_t * (2.0 - a_t))) / (np.pi * a_t * (2.0 - a_t))
    return normal * tang


def build_wall(kernel: WallKernel, vgrid: VelocityGrid, gas_const: float) -> WallOperator:
    nodes = vgrid.nodes
    xn = nodes[:, 0] * kernel.normal
    incoming = np.nonzero(xn < 0)[0]
    outgoing = np.nonzero(xn > 0)[0]
    mirror_all = vgrid.mirror_index(0)
    mirror = mirror_all[outgoing]
    f_w = maxwellian(nodes, 1.0, np.zeros(3), kernel.t_wall, gas_const)
    op = WallOperator(kernel, vgrid, gas_const, incoming, outgoing, mirror, f_w)
    if kernel.kind == CL:
        c = np.sqrt(2.0 * gas_const * kernel.t_wall)
        sc = nodes / c
        dens = _cl_density(np.abs(sc[outgoing, 0]), sc[outgoing, 1:],
                           np.abs(sc[incoming, 0]), sc[incoming, 1:],
                           kernel.alpha_n, kernel.alpha_t)
        phi_w = np.abs(nodes[incoming, 0]) * f_w[incoming]
        q = dens * phi_w[None, :]
        target_out = np.abs(nodes[outgoing, 0]) * f_w[outgoing]
        target_out = target_out / target_out.sum()
        q = q / q.sum()
        q = _sinkhorn(q, target_out, phi_w / phi_w.sum())
        op.flux_matrix = q / (phi_w / phi_w.sum())[None, :]
    return op


def _sinkhorn(q, row_target, col_target, tol=1e-14, max_iter=20000):
    for _ in range(max_iter):
        r = q.sum(axis=1)
        q *= (row_target / r)[:, None]
        c = q.sum(axis=0)
        q *= (col_target / c)[None, :]
        err = np.max(np.abs(q.sum(axis=1) - row_target) / row_target)
        if err < tol:
            break
    return q


def dg_boundary_flux(state: np.ndarray, vgrid: VelocityGrid, t_wall: float,
                     gas_const: float, normal: int) -> float:
    """sum over all nodes of (xi.n) f ln(f/f_w) w, with 0 ln 0 = 0.

    ``normal`` is the inward normal of the wall. Non-positive for any state
    produced by a kernel that preserves f_w and conserves mass.
    """
    f = np.asarray(state, dtype=float)
    if np.any(f < 0):
        raise ValueError("negative distribution in wall entropy flux")
    f_w = maxwellian(vgrid.nodes, 1.0, np.zeros(3), t_wall, gas_const)
    xn = vgrid.nodes[:, 0] * normal
    pos = f > 0
    term = np.zeros_like(f)
    term[pos] = f[pos] * np.log(f[pos] / f_w[pos])
    return float(np.sum(xn * term) * vgrid.cell_volume)
