"""Pair correlation at contact, plus an exact small-N configurational oracle.

Production runs use closed forms (``unity`` or Carnahan-Starling contact value
at the midpoint density). The oracle estimates the N-body configuration
integrals by Monte Carlo in a 3D box whose weight field varies along x only:

    Y(X1)  = int w(X2)..w(XN) Theta dX2..dXN
    phi    = int w(X1)..w(XN) Theta dX1..dXN
    rho(X) = m N w(X) Y(X) / phi
    g2     = (N-1)/N * phi * E[Theta_(1,2)] / (Y(X1) Y(X2))

with the gauge int w = 1. ``Theta`` is the product of hard-core step
functions over all pairs, ``Theta_(1,2)`` the same product without the (1,2)
factor.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

UNITY = "unity"
CONTACT_CS = "contact_cs"
CONFIG_ORACLE = "config_oracle"
KINDS = (UNITY, CONTACT_CS, CONFIG_ORACLE)

ETA_MAX = 0.64  # random close packing


class UndefinedCorrelation(ValueError):
    """g2 requested at a point where the density vanishes."""


class InversionError(RuntimeError):
    def __init__(self, msg, residual, iterations):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class CorrelationModel:
    kind: str = UNITY
    sigma: float = 1.0
    mass: float = 1.0
    n_particles: int = 2
    samples: int = 20000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown correlation model {self.kind!r}")
        if not (self.sigma >= 0 and self.mass > 0):
            raise ValueError("sigma must be >= 0 and mass > 0")
        if self.kind == CONFIG_ORACLE and self.n_particles < 2:
            raise ValueError("config oracle needs N >= 2")

    @property
    def eta_coef(self) -> float:
        """Packing fraction per unit mass density."""
        return np.pi * self.sigma ** 3 / (6.0 * self.mass)

    def kernel_code(self):
        """(mode, eta_coef) pair understood by the compiled collision kernel."""
        if self.kind == UNITY:
            return 0, 0.0
        if self.kind == CONTACT_CS:
            return 1, self.eta_coef
        raise ValueError("the N-body oracle cannot drive the collision operator; "
                         "use unity or contact_cs")


def g_cs(eta):
    """Carnahan-Starling contact value (1 - eta/2)/(1 - eta)^3."""
    eta = np.asarray(eta, dtype=float)
    if np.any(eta >= ETA_MAX):
        raise ValueError(f"packing fraction {float(np.max(eta)):.3f} >= {ETA_MAX} "
                         "(beyond random close packing)")
    out = (1.0 - 0.5 * eta) / (1.0 - eta) ** 3
    return out if out.ndim else float(out)


def psi_cs(eta):
    """Carnahan-Starling excess free energy per particle in units of kT."""
    eta = np.asarray(eta, dtype=float)
    return eta * (4.0 - 3.0 * eta) / (1.0 - eta) ** 2


def eval_g(model: CorrelationModel, rho_field, grid, x, y, state=None):
    """Pair correlation at slab positions x, y (arrays broadcast).

    For the oracle, ``x`` and ``y`` are 3-vectors in the oracle box and
    ``state`` must be a converged ConfigState; the result is an OracleEstimate.
    """
    if model.kind == CONFIG_ORACLE:
        if state is None:
            raise ValueError("config oracle evaluation needs a ConfigState")
        return exact_g2(state.weights, state.n_particles, state.sigma, x, y,
                        samples=model.samples, seed=model.seed)
    from .phase_grid import shifted_value

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = (x >= 0) & (x <= grid.length) & (y >= 0) & (y <= grid.length)
    if model.kind == UNITY:
        out = inside.astype(float)
    else:
        mid = 0.5 * (x + y)
        eta = model.eta_coef * np.asarray(shifted_value(rho_field, grid, mid, 0.0))
        out = np.where(inside, g_cs(np.where(inside, eta, 0.0)), 0.0)
    return out if np.ndim(out) else float(out)


# --------------------------------------------------------------------------
# configurational oracle

@dataclass(frozen=True)
class Box:
    lengths: tuple = (1.0, 1.0, 1.0)
    periodic: tuple = (False, True, True)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def area(self) -> float:
        return float(self.lengths[1] * self.lengths[2])


@dataclass(frozen=True)
class WeightField:
    """w(X) piecewise constant on equal x-bins, uniform across y and z.

    ``probs[k]`` is the integral of w over bin k, so the gauge is sum = 1.
    """

    box: Box
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or len(p) < 1 or np.any(p < 0) or not p.sum() > 0:
            raise ValueError("weight field must be non-negative with positive measure")
        object.__setattr__(self, "probs", p / p.sum())

    @classmethod
    def uniform(cls, box: Box, n_bins: int = 1):
        return cls(box, np.full(n_bins, 1.0 / n_bins))

    @property
    def n_bins(self) -> int:
        return len(self.probs)

    @property
    def dx(self) -> float:
        return self.box.lengths[0] / self.n_bins

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_bins) + 0.5) * self.dx

    @property
    def bin_volume(self) -> float:
        return self.dx * self.box.area

    def values(self) -> np.ndarray:
        return self.probs / self.bin_volume

    def at(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        lx = np.asarray(self.box.lengths)
        inside = np.all((pts >= 0) & (pts <= lx), axis=-1)
        k = np.clip((pts[..., 0] / self.dx).astype(int), 0, self.n_bins - 1)
        return np.where(inside, self.values()[k], 0.0)

    def place(self, u, shift_x=0.0):
        """Map uniforms in [0,1)^3 to positions distributed as w.

        ``shift_x`` rotates the x uniforms (Cranley-Patterson) so that
        evaluations at different points can share random numbers.
        """
        u = np.asarray(u, dtype=float)
        ux = np.mod(u[..., 0] + shift_x, 1.0)
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        k = np.searchsorted(cdf, ux, side="right")
        k = np.minimum(k, self.n_bins - 1)
        lo = np.concatenate([[0.0], cdf[:-1]])[k]
        frac = (ux - lo) / self.probs[k]
        out = np.empty(u.shape)
        out[..., 0] = (k + np.clip(frac, 0.0, 1.0)) * self.dx
        out[..., 1] = u[..., 1] * self.box.lengths[1]
        out[..., 2] = u[..., 2] * self.box.lengths[2]
        return out

    def cdf_at(self, x: float) -> float:
        cdf = np.concatenate([[0.0], np.cumsum(self.probs)])
        r = np.clip(x / self.dx, 0.0, self.n_bins)
        k = min(int(r), self.n_bins - 1)
        return float(cdf[k] + (r - k) * self.probs[k])


def _sep2(a, b, box: Box):
    d = a - b
    for ax in range(3):
        if box.periodic[ax]:
            L = box.lengths[ax]
            d[..., ax] -= L * np.round(d[..., ax] / L)
    return np.sum(d * d, axis=-1)


def hard_core(pos, sigma: float, box: Box, skip=None):
    """Theta over the last-but-one axis of ``pos`` (..., N, 3).

    ``skip`` is an (i, j) pair whose factor is left out (Theta_(i,j)).
    """
    n = pos.shape[-2]
    out = np.ones(pos.shape[:-2], dtype=bool)
    s2 = sigma * sigma
    for i in range(n):
        for j in range(i + 1, n):
            if skip is not None and {i, j} == set(skip):
                continue
            out &= _sep2(pos[..., i, :], pos[..., j, :], box) >= s2
    return out


@dataclass
class OracleEstimate:
    estimate: float
    std_error: float
    samples: int
    seed: int
    inputs: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _mean_se(vals):
    vals = np.asarray(vals, dtype=float)
    s = len(vals)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(s)) if s > 1 else 0.0


def _as_point(box: Box, x):
    p = np.asarray(x, dtype=float)
    if p.ndim == 0:
        return np.array([float(p), 0.5 * box.lengths[1], 0.5 * box.lengths[2]])
    return p


def _y_indicators(w: WeightField, n: int, sigma: float, x1, u):
    """Per-sample Theta with X1 fixed; u has shape (S, N-1, 3)."""
    x1 = _as_point(w.box, x1)
    others = w.place(u, shift_x=w.cdf_at(x1[0]))
    pos = np.concatenate([np.broadcast_to(x1, (len(u), 1, 3)), others], axis=1)
    return hard_core(pos, sigma, w.box)


def config_Y(w: WeightField, n: int, sigma: float, x1, samples: int = 20000, seed: int = 0):
    """Monte-Carlo estimate of Y(X1); x1 may be a scalar x or a 3-vector."""
    if n < 2:
        raise ValueError("N >= 2 required")
    rng = np.random.default_rng(seed)
    u = rng.random((samples, n - 1, 3))
    est, se = _mean_se(_y_indicators(w, n, sigma, x1, u))
    return OracleEstimate(est, se, samples, seed,
                          {"n": n, "sigma": sigma, "x1": _as_point(w.box, x1).tolist()})


def config_phi(w: WeightField, n: int, sigma: float, samples: int = 20000, seed: int = 0):
    if n < 2:
        raise ValueError("N >= 2 required")
    rng = np.random.default_rng(seed)
    pos = w.place(rng.random((samples, n, 3)))
    est, se = _mean_se(hard_core(pos, sigma, w.box))
    return OracleEstimate(est, se, samples, seed, {"n": n, "sigma": sigma})


def exact_g2(w: WeightField, n: int, sigma: float, x, y, samples: int = 20000, seed: int = 0):
    """g2(X, Y) from its N-body definition; independent streams per factor."""
    x = _as_point(w.box, x)
    y = _as_point(w.box, y)
    if w.at(x) <= 0 or w.at(y) <= 0:
        raise UndefinedCorrelation("density vanishes at one of the points")
    s_phi, s_yx, s_yy, s_12 = np.random.SeedSequence(seed).spawn(4)
    phi = config_phi(w, n, sigma, samples, s_phi)
    yx = config_Y(w, n, sigma, x, samples, s_yx)
    yy = config_Y(w, n, sigma, y, samples, s_yy)
    if yx.estimate <= 0 or yy.estimate <= 0:
        raise UndefinedCorrelation("Y vanishes at one of the points")
    if n > 2:
        u = np.random.default_rng(s_12).random((samples, n - 2, 3))
        rest = w.place(u)
        pos = np.concatenate([np.broadcast_to(x, (samples, 1, 3)),
                              np.broadcast_to(y, (samples, 1, 3)), rest], axis=1)
        e12, se12 = _mean_se(hard_core(pos, sigma, w.box, skip=(0, 1)))
    else:
        e12, se12 = 1.0, 0.0
    g = (n - 1) / n * phi.estimate * e12 / (yx.estimate * yy.estimate)
    rel2 = 0.0
    for est, se in ((phi.estimate, phi.std_error), (e12, se12),
                    (yx.estimate, yx.std_error), (yy.estimate, yy.std_error)):
        if est > 0:
            rel2 += (se / est) ** 2
    return OracleEstimate(float(g), float(abs(g) * np.sqrt(rel2)), samples, int(seed),
                          {"n": n, "sigma": sigma, "x": x.tolist(), "y": y.tolist()})


@dataclass
class ConfigState:
    weights: WeightField
    n_particles: int
    sigma: float
    mass: float
    y: np.ndarray = field(repr=False)
    y_se: np.ndarray = field(repr=False)
    phi: float = 1.0
    iterations: int = 0
    residual: float = 0.0
    samples: int = 0
    seed: int = 0

    def rho(self) -> np.ndarray:
        """Density per x-bin implied by (w, Y, phi)."""
        return self.mass * self.n_particles * self.weights.values() * self.y / self.phi

    def h_collisional(self, rho=None) -> float:
        """-int rho ln(rho/w) dX - m ln(phi), integrated over the box."""
        rho = self.rho() if rho is None else np.asarray(rho, dtype=float)
        w = self.weights.values()
        pos = rho > 0
        integrand = np.zeros_like(rho)
        integrand[pos] = rho[pos] * np.log(rho[pos] / w[pos])
        return float(-integrand.sum() * self.weights.bin_volume - self.mass * np.log(self.phi))


def _y_on_bins(w: WeightField, n: int, sigma: float, u):
    ys, ses = [], []
    for xc in w.centers:
        est, se = _mean_se(_y_indicators(w, n, sigma, xc, u))
        ys.append(est)
        ses.append(se)
    return np.array(ys), np.array(ses)


def invert_density_to_w(rho, box: Box, n: int, sigma: float, mass: float,
                        tol: float = 1e-6, max_iter: int = 200,
                        samples: int = 20000, seed: int = 0) -> ConfigState:
    """Solve rho = m N w Y[w] / phi[w] for w on the x-bins of ``rho``.

    The same uniforms are reused every sweep, so the map being iterated is a
    fixed deterministic function of w and the iteration can converge to tol
    even though each Y carries Monte-Carlo error.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("density must be non-negative")
    probe = WeightField.uniform(box, len(rho))
    total = rho.sum() * probe.bin_volume
    if abs(total - mass * n) > 1e-3 * mass * n:
        raise ValueError(f"density integrates to {total:g}, expected m N = {mass * n:g}")
    target = rho * (mass * n / total)
    u = np.random.default_rng(seed).random((samples, n - 1, 3))
    p = target * probe.bin_volume / (mass * n)
    occupied = p > 0
    resid = np.inf
    for it in range(1, max_iter + 1):
        w = WeightField(box, p)
        y, y_se = _y_on_bins(w, n, sigma, u)
        if np.any(y[occupied] <= 0):
            raise InversionError("Y vanished on an occupied bin", resid, it)
        phi = float(np.sum(w.probs * y))
        p_new = np.zeros_like(p)
        p_new[occupied] = target[occupied] * probe.bin_volume * phi / (mass * n * y[occupied])
        p_new /= p_new.sum()
        resid = float(np.max(np.abs(p_new[occupied] - w.probs[occupied]) / w.probs[occupied]))
        if resid < tol:
            wf = WeightField(box, w.probs)
            return ConfigState(wf, n, sigma, mass, y, y_se, phi, it, resid, samples, seed)
        p = p_new
    raise InversionError(f"no convergence after {max_iter} sweeps (residual {resid:.3e})",
                         resid, max_iter)


@dataclass
class ReductionCheck:
    lhs: float
    rhs: float
    lhs_se: float
    rhs_se: float

    @property
    def residual(self) -> float:
        return self.lhs - self.rhs

    @property
    def combined_se(self) -> float:
        return float(np.hypot(self.lhs_se, self.rhs_se))


def _contact_rule(w: WeightField, x1: float, sigma: float, per_piece: int = 8, n_phi: int = 16):
    """Sphere nodes for directions beta around X1, split where x1 + sigma*beta_x
    crosses a bin edge so the piecewise-constant w is integrated exactly."""
    edges = np.arange(w.n_bins + 1) * w.dx
    mu_cuts = (edges - x1) / sigma
    mu_cuts = mu_cuts[(mu_cuts > -1) & (mu_cuts < 1)]
    breaks = np.concatenate([[-1.0], np.sort(mu_cuts), [1.0]])
    t, wt = np.polynomial.legendre.leggauss(per_piece)
    mus, wmus = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        mus.append(0.5 * (b - a) * t + 0.5 * (a + b))
        wmus.append(0.5 * (b - a) * wt)
    mu = np.concatenate(mus)
    wmu = np.concatenate(wmus)
    ph = (np.arange(n_phi) + 0.5) * 2 * np.pi / n_phi
    s = np.sqrt(1 - mu ** 2)
    beta = np.stack([np.repeat(mu, n_phi), np.outer(s, np.cos(ph)).ravel(),
                     np.outer(s, np.sin(ph)).ravel()], axis=1)
    wts = np.repeat(wmu, n_phi) * (2 * np.pi / n_phi)
    return beta, wts


def verify_reduction_identity(state: ConfigState, x1: float, samples: int = 200000,
                              seed: int = 0, h: float | None = None,
                              chunk: int = 20000, lhs_samples: int | None = None) -> ReductionCheck:
    """Compare the contact-sphere integral of the pair term with rho d ln(rho/w)/dx.

    Both sides carry the common factor m N w(X1)/phi. The left side is a
    sphere-quadrature sum over contact directions with Monte Carlo over the
    remaining N-2 particles; the right side is a common-random-number central
    difference of Y. The left side has far lower variance, so by default it
    gets a fiftieth of the samples.
    """
    w, n, sigma = state.weights, state.n_particles, state.sigma
    box = w.box
    p1 = _as_point(box, x1)
    pref = state.mass * n * float(w.at(p1)) / state.phi
    if sigma == 0:
        return ReductionCheck(0.0, 0.0, 0.0, 0.0)
    s_l, s_r = np.random.SeedSequence(seed).spawn(2)

    beta, bw = _contact_rule(w, p1[0], sigma)
    partners = p1[None, :] + sigma * beta
    c = bw * beta[:, 0] * w.at(partners)
    if n == 2:
        lhs_vals = np.array([c.sum()])
    else:
        rng = np.random.default_rng(s_l)
        n_lhs = lhs_samples or max(2000, samples // 50)
        lhs_vals = []
        n_done = 0
        while n_done < n_lhs:
            m = min(chunk, n_lhs - n_done)
            rest = w.place(rng.random((m, n - 2, 3)))
            acc = np.zeros(m)
            for q in np.nonzero(c)[0]:
                pos = np.concatenate([np.broadcast_to(p1, (m, 1, 3)),
                                      np.broadcast_to(partners[q], (m, 1, 3)), rest], axis=1)
                acc += c[q] * hard_core(pos, sigma, box, skip=(0, 1))
            lhs_vals.append(acc)
            n_done += m
        lhs_vals = np.concatenate(lhs_vals)
    lhs_vals = -(n - 1) * sigma ** 2 * lhs_vals
    lhs, lhs_se = _mean_se(lhs_vals) if len(lhs_vals) > 1 else (float(lhs_vals[0]), 0.0)

    h = 0.05 * sigma if h is None else h
    rng = np.random.default_rng(s_r)
    diffs = []
    n_done = 0
    while n_done < samples:
        m = min(chunk, samples - n_done)
        u = rng.random((m, n - 1, 3))
        plus = _y_indicators(w, n, sigma, p1 + [h, 0, 0], u).astype(float)
        minus = _y_indicators(w, n, sigma, p1 - [h, 0, 0], u).astype(float)
        diffs.append((plus - minus) / (2 * h))
        n_done += m
    rhs, rhs_se = _mean_se(np.concatenate(diffs))
    return ReductionCheck(pref * lhs, pref * rhs, pref * lhs_se, pref * rhs_se)
