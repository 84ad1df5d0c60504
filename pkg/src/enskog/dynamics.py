"""Time integration: upwind transport with wall closure, Enskog collisions,
optional self-consistent mean-field force.

One step is Strang ordered: half transport, collision (explicit Euler),
optional force, half transport.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import collision
from .boundary import WallOperator
from .collision import CollisionWorkspace
from .phase_grid import SpatialGrid, VelocityGrid

log = logging.getLogger(__name__)


class NumericalAbort(RuntimeError):
    """Raised when the state becomes non-finite or clipping gets out of hand."""

    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state


# ---------------------------------------------------------------------------
# mean-field force

@dataclass(frozen=True)
class VlasovField:
    """Sutherland tail: Phi(r) = -(eps/m^2)(sigma/r)^gamma for r > sigma, -eps/m^2 inside.

    Phi is per unit mass squared so that -grad(Phi * rho) is an acceleration.
    """

    epsilon: float
    gamma: float = 6.0
    sigma: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("attraction depth must be >= 0")
        if not self.gamma > 3:
            raise ValueError("tail exponent must exceed 3 for a finite slab kernel")

    @property
    def depth(self) -> float:
        return self.epsilon / self.mass ** 2

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        inner = np.full_like(r, -self.depth)
        with np.errstate(divide="ignore"):
            outer = -self.depth * (self.sigma / np.maximum(r, self.sigma)) ** self.gamma
        return np.where(r > self.sigma, outer, inner)

    def kernel(self, s):
        """K(s) = 2 pi int_{|s|}^inf Phi(r) r dr, the plane-integrated potential."""
        a = np.abs(np.asarray(s, dtype=float))
        sg, gm, d = self.sigma, self.gamma, self.depth
        with np.errstate(divide="ignore", invalid="ignore"):
            outer = -2 * np.pi * d * sg ** gm * a ** (2 - gm) / (gm - 2)
        inner = -2 * np.pi * d * ((sg ** 2 - a ** 2) / 2 + sg ** 2 / (gm - 2))
        return np.where(a < sg, inner, outer)

    def kernel_slope(self, s):
        """dK/ds = -2 pi Phi(|s|) s."""
        s = np.asarray(s, dtype=float)
        return -2 * np.pi * self.phi(np.abs(s)) * s

    def force(self, rho, space: SpatialGrid) -> np.ndarray:
        """Cell-averaged acceleration F_k = sum_j rho_j [K((d+1/2)dx) - K((d-1/2)dx)], d = j-k."""
        n = space.n_cells
        d = np.arange(n)[None, :] - np.arange(n)[:, None]
        m = self.kernel((d + 0.5) * space.dx) - self.kernel((d - 0.5) * space.dx)
        return m @ np.asarray(rho, dtype=float)

    def potential_energy(self, rho, space: SpatialGrid) -> float:
        x = space.centers
        kmat = self.kernel(x[None, :] - x[:, None])
        rho = np.asarray(rho, dtype=float)
        return float(0.5 * space.dx ** 2 * rho @ kmat @ rho)


# ---------------------------------------------------------------------------
# transport

def advect(f, dt: float, space: SpatialGrid, vgrid: VelocityGrid,
           left: WallOperator, right: WallOperator) -> np.ndarray:
    """First-order upwind finite-volume update of every velocity node.

    Wall faces take their inflow from the reflected state of the adjacent
    cell, so the net mass flux through each wall is zero to rounding.
    """
    xi_x = vgrid.nodes[:, 0]
    cfl = dt * vgrid.xi_max / space.dx
    if cfl > 1.0 + 1e-12:
        raise ValueError(f"transport CFL {cfl:.3f} > 1")
    n = space.n_cells
    ghost_l = left.reflect(f[0])
    ghost_r = right.reflect(f[-1])
    pos = xi_x > 0
    flux = np.empty((n + 1, f.shape[1]))
    # interior faces
    flux[1:n] = np.where(pos, f[:-1], f[1:]) * xi_x
    flux[0] = np.where(pos, ghost_l, f[0]) * xi_x
    flux[n] = np.where(pos, f[-1], ghost_r) * xi_x
    return f - (dt / space.dx) * (flux[1:] - flux[:-1])


def force_shift(f, accel, dt: float, vgrid: VelocityGrid, gas_const: float) -> np.ndarray:
    """Semi-Lagrangian shift f(xi) <- f(xi - a dt e_x) per cell.

    The interpolated quantity is f divided by the cell's own Maxwellian, so a
    local Maxwellian is translated exactly (no numerical heating); each cell's
    mass is then restored.
    """
    n = vgrid.n_per_axis
    w = vgrid.cell_volume
    mom_ref, t_ref = collision.reference_state(f, vgrid, gas_const,
                                               t_floor=1e-3 * vgrid.xi_max ** 2 / gas_const)
    out = np.empty_like(f)
    ax = vgrid.axis
    h_ax = vgrid.dxi
    for k in range(f.shape[0]):
        shift = accel[k] * dt
        rt = gas_const * t_ref[k]
        mref = np.exp(-np.sum((vgrid.nodes - mom_ref[k]) ** 2, axis=1) / (2 * rt))
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.where(mref > 0, f[k] / mref, 0.0).reshape(n, n, n)
        src = ax - shift
        r = np.clip((src - ax[0]) / h_ax, 0.0, n - 1.0)
        i0 = np.minimum(r.astype(int), n - 2)
        t = r - i0
        hs = (1 - t)[:, None, None] * h[i0] + t[:, None, None] * h[i0 + 1]
        src_nodes = vgrid.nodes.copy()
        src_nodes[:, 0] -= shift
        mnew = np.exp(-np.sum((src_nodes - mom_ref[k]) ** 2, axis=1) / (2 * rt))
        fk = hs.ravel() * mnew
        m_old = f[k].sum()
        m_new = fk.sum()
        out[k] = fk * (m_old / m_new) if m_new > 0 else fk
    return out


# ---------------------------------------------------------------------------
# stepping

@dataclass
class SimulationState:
    f: np.ndarray
    t: float = 0.0
    step: int = 0
    clipped: float = 0.0          # mass clipped in the last step
    last_J: np.ndarray | None = field(default=None, repr=False)


@dataclass
class Stepper:
    ws: CollisionWorkspace
    left: WallOperator
    right: WallOperator
    dt: float
    vlasov: VlasovField | None = None
    resample: bool = False
    _fixed: collision.SampleSet | None = field(default=None, repr=False)

    def samples(self, step: int):
        ws = self.ws
        if ws.mode == collision.FULL:
            return None
        if self.resample:
            return collision.workspace_samples(ws, step)
        if self._fixed is None:
            self._fixed = collision.workspace_samples(ws, 0)
        return self._fixed

    def step(self, state: SimulationState) -> SimulationState:
        ws = self.ws
        sp, vg = ws.space, ws.velocity
        f = advect(state.f, 0.5 * self.dt, sp, vg, self.left, self.right)
        J = collision.apply(f, ws, project=True, step=state.step,
                            samples=self.samples(state.step))
        f = f + self.dt * J
        clipped = 0.0
        if np.any(f < 0):
            w = vg.cell_volume
            mass_before = f.sum(axis=1)
            neg = np.minimum(f, 0.0)
            clipped = -float(neg.sum()) * w * sp.dx
            f = np.maximum(f, 0.0)
            mass_after = f.sum(axis=1)
            scale = np.where(mass_after > 0, mass_before / np.where(mass_after > 0, mass_after, 1), 1)
            f *= scale[:, None]
        if self.vlasov is not None and self.vlasov.epsilon > 0:
            rho = f.sum(axis=1) * vg.cell_volume
            f = force_shift(f, self.vlasov.force(rho, sp), self.dt, vg, ws.gas_const)
        f = advect(f, 0.5 * self.dt, sp, vg, self.left, self.right)
        if not np.all(np.isfinite(f)):
            raise NumericalAbort(f"non-finite distribution at step {state.step + 1}", state)
        return SimulationState(f, state.t + self.dt, state.step + 1, clipped, J)


def collision_stability(f, ws: CollisionWorkspace, dt: float, samples=None) -> float:
    """dt * max over nodes of loss / f (nodes with f = 0 carry no loss)."""
    loss = collision.loss(f, ws, samples=samples)
    pos = f > 0
    if not np.any(pos):
        return 0.0
    return float(dt * np.max(loss[pos] / f[pos]))


def linear_growth(ws: CollisionWorkspace, dt: float, rho: float, t_wall: float,
                  samples=None, iters: int = 30, seed: int = 0) -> float:
    """Largest per-step amplification of I + dt L, L the collision operator
    linearized about the uniform resting Maxwellian (power iteration).

    Conserved modes give 1; anything noticeably above 1 means the sampled
    quadrature has a growing mode and rounding will be amplified.
    """
    from .phase_grid import maxwellian
    vg, sp = ws.velocity, ws.space
    n = sp.n_cells
    m = maxwellian(vg.nodes, np.full(n, rho), np.zeros((n, 3)), np.full(n, t_wall), ws.gas_const)
    j0 = collision.apply(m, ws, samples=samples)
    v = np.random.default_rng(seed).normal(size=m.shape) * m
    v /= np.linalg.norm(v)
    eps = 1e-6 * np.abs(m).max()
    growth = 0.0
    for _ in range(iters):
        jv = (collision.apply(m + eps * v, ws, samples=samples) - j0) / eps
        w = v + dt * jv
        growth = float(np.linalg.norm(w))
        v = w / growth
    return growth


def cfl_dt(space: SpatialGrid, vgrid: VelocityGrid, cfl: float) -> float:
    return cfl * space.dx / vgrid.xi_max


def steps_for(t_end: float, dt: float) -> int:
    return int(math.ceil(t_end / dt - 1e-9))
