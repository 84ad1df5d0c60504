"""Phase-space discretization: slab cells, Cartesian velocity grid, sphere rule.

Distribution functions live on ``(n_cells, n_nodes)`` arrays where the node
index runs over the flattened velocity grid in C order (x slowest).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np


@dataclass(frozen=True)
class SpatialGrid:
    length: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 2:
            raise ValueError("need at least 2 spatial cells")
        if not self.length > 0:
            raise ValueError("slab length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx


@dataclass(frozen=True)
class VelocityGrid:
    xi_max: float
    n_per_axis: int
    axis: np.ndarray = field(repr=False, compare=False)
    nodes: np.ndarray = field(repr=False, compare=False)

    @property
    def dxi(self) -> float:
        return 2.0 * self.xi_max / self.n_per_axis

    @property
    def n_nodes(self) -> int:
        return self.n_per_axis ** 3

    @property
    def cell_volume(self) -> float:
        return self.dxi ** 3

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.n_nodes, self.cell_volume)

    def mirror_index(self, component: int = 0) -> np.ndarray:
        """Node permutation flipping the sign of one velocity component."""
        n = self.n_per_axis
        idx = np.arange(self.n_nodes).reshape(n, n, n)
        return np.flip(idx, axis=component).ravel()

    def parity_index(self) -> np.ndarray:
        """Node permutation for xi -> -xi."""
        return self.n_nodes - 1 - np.arange(self.n_nodes)


def build_velocity_grid(xi_max: float, n_per_axis: int) -> VelocityGrid:
    """Midpoint-rule grid on the cube [-xi_max, xi_max]^3."""
    if not xi_max > 0:
        raise ValueError("xi_max must be positive")
    if n_per_axis < 4 or n_per_axis % 2:
        raise ValueError(
            "n_per_axis must be even and >= 4 (an odd count breaks the "
            "xi -> -xi symmetry of the grid)"
        )
    h = 2.0 * xi_max / n_per_axis
    # mirror the positive half so that axis[::-1] == -axis holds bit for bit
    pos = (np.arange(n_per_axis // 2) + 0.5) * h
    axis = np.concatenate([-pos[::-1], pos])
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    nodes = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    axis.setflags(write=False)
    nodes.setflags(write=False)
    return VelocityGrid(xi_max, n_per_axis, axis, nodes)


@dataclass(frozen=True)
class SphereQuadrature:
    """Product rule: Gauss-Legendre in alpha_x on each hemisphere times uniform azimuth.

    The polar axis is the slab normal. Splitting the alpha_x range at 0 makes
    half-space integrals such as the wall flux exact for polynomial integrands.
    ``directions[:, 0]`` takes 2*order distinct values.
    """

    order: int
    directions: np.ndarray = field(repr=False, compare=False)
    weights: np.ndarray = field(repr=False, compare=False)

    @property
    def size(self) -> int:
        return len(self.weights)

    def antipode_index(self) -> np.ndarray:
        n_mu = n_phi = 2 * self.order
        i = np.arange(n_mu)[:, None]
        j = np.arange(n_phi)[None, :]
        return ((n_mu - 1 - i) * n_phi + (j + n_phi // 2) % n_phi).ravel()


def build_sphere_quadrature(order: int) -> SphereQuadrature:
    if order < 2:
        raise ValueError("sphere quadrature order must be >= 2")
    t, wt = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (t + 1.0)
    mu = np.concatenate([-half[::-1], half])
    wmu = 0.5 * np.concatenate([wt[::-1], wt])
    n_phi = 2 * order
    phi = (np.arange(n_phi) + 0.5) * (2.0 * np.pi / n_phi)
    s = np.sqrt(1.0 - mu ** 2)
    d = np.empty((2 * order, n_phi, 3))
    d[:, :, 0] = mu[:, None]
    d[:, :, 1] = s[:, None] * np.cos(phi)[None, :]
    d[:, :, 2] = s[:, None] * np.sin(phi)[None, :]
    d = d.reshape(-1, 3)
    d /= np.linalg.norm(d, axis=1)[:, None]
    w = (wmu[:, None] * np.full(n_phi, 2.0 * np.pi / n_phi)[None, :]).ravel()
    d.setflags(write=False)
    w.setflags(write=False)
    return SphereQuadrature(order, d, w)


@nb.njit(cache=True)
def interp_weights(p, x0, dx, n, length):
    """Two-point stencil ``(j0, j1, t, inside)`` for evaluating a cell field at p.

    Linear between cell centers, constant between the outermost centers and
    the walls, and flagged outside when p leaves [0, length].
    """
    if p < 0.0 or p > length:
        return 0, 0, 0.0, False
    r = (p - x0) / dx
    if r <= 0.0:
        return 0, 0, 0.0, True
    if r >= n - 1:
        return n - 1, n - 1, 0.0, True
    j0 = int(r)
    if j0 > n - 2:
        j0 = n - 2
    return j0, j0 + 1, r - j0, True


@nb.njit(cache=True)
def _shifted_values(values, x0, dx, length, points):
    n = values.shape[0]
    out = np.zeros(points.shape[0])
    for i in range(points.shape[0]):
        j0, j1, t, inside = interp_weights(points[i], x0, dx, n, length)
        if inside:
            out[i] = (1.0 - t) * values[j0] + t * values[j1]
    return out


def shifted_value(field_values, grid: SpatialGrid, x, s):
    """Evaluate a cell field at ``x + s``; zero once the point leaves the slab."""
    vals = np.ascontiguousarray(field_values, dtype=float)
    pts = np.atleast_1d(np.asarray(x, dtype=float) + np.asarray(s, dtype=float))
    out = _shifted_values(vals, 0.5 * grid.dx, grid.dx, grid.length, pts.ravel())
    out = out.reshape(pts.shape)
    return out if np.ndim(x) or np.ndim(s) else float(out[0])


def maxwellian(nodes: np.ndarray, rho, v, temp, gas_const: float) -> np.ndarray:
    """Mass-based Maxwellian on ``nodes``; broadcasts over leading cell axis."""
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    temp = np.asarray(temp, dtype=float)
    rt = gas_const * temp
    c2 = np.sum((nodes - v[..., None, :]) ** 2, axis=-1) if v.ndim > 1 else np.sum((nodes - v) ** 2, axis=-1)
    rt_b = rt[..., None] if rt.ndim else rt
    rho_b = rho[..., None] if rho.ndim else rho
    return rho_b / (2.0 * np.pi * rt_b) ** 1.5 * np.exp(-c2 / (2.0 * rt_b))
