"""Build a solver from a config, march it, write outputs and verdicts."""
from __future__ import annotations

import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .boundary import WallKernel, build_wall, dg_boundary_flux
from .collision import CollisionWorkspace
from .config import SimulationConfig
from .correlation import CorrelationModel
from .diagnostics import (CS_SURROGATE, IDEAL, collisional_fluxes, free_energy, h_collisional,
                          h_kinetic, moments, total_energy, wall_maxwellian)
from .dynamics import SimulationState, Stepper, VlasovField, collision_stability, linear_growth
from .phase_grid import SpatialGrid, build_sphere_quadrature, build_velocity_grid, maxwellian

SERIES_COLUMNS = ["t", "mass", "mom_x", "E", "Hk", "Hc", "F", "Fprime", "dF_dt",
                  "DG_flux_left", "DG_flux_right", "lemma1_mom", "lemma1_en", "T_mean", "T_max_dev"]
SNAPSHOT_COLUMNS = ["x", "rho", "v_x", "T", "pc_xx", "pc_yy", "qc_x"]

PASS, FAIL, INFO = "PASS", "FAIL", "INFO"
GROWTH_LIMIT = 1.1   # per-step amplification of the linearized fixed-sample collision step


@dataclass
class Problem:
    cfg: SimulationConfig
    ws: CollisionWorkspace
    stepper: Stepper
    f0: np.ndarray
    vlasov: VlasovField | None

    @property
    def space(self):
        return self.ws.space

    @property
    def vgrid(self):
        return self.ws.velocity


def _wall(w, t_wall, normal):
    return WallKernel(w.kind, t_wall, w.accommodation, w.alpha_n, w.alpha_t, normal)


def initial_state(cfg: SimulationConfig, space: SpatialGrid, vgrid) -> np.ndarray:
    ini = cfg.initial
    x = space.centers
    rho = np.full(space.n_cells, ini.density)
    if ini.profile == "sine":
        rho = rho * (1 + ini.amplitude * np.cos(2 * np.pi * x / space.length))
    v = np.zeros((space.n_cells, 3))
    v[:, 0] = ini.velocity_x
    return maxwellian(vgrid.nodes, rho, v, np.full(space.n_cells, ini.temperature),
                      cfg.physics.gas_const)


def build(cfg: SimulationConfig) -> Problem:
    ph = cfg.physics
    space = SpatialGrid(cfg.geometry.length, cfg.geometry.n_cells)
    vgrid = build_velocity_grid(cfg.velocity.xi_max, cfg.velocity.n_per_axis)
    sphere = build_sphere_quadrature(cfg.sphere.order)
    c = cfg.correlation
    model = CorrelationModel(c.kind, ph.sigma, ph.mass, c.n_particles, c.samples, c.seed)
    it = cfg.integrator
    ws = CollisionWorkspace(space, vgrid, sphere, model, ph.sigma, ph.mass, ph.gas_const,
                            mode=it.collision_mode, samples=it.samples, seed=it.seed,
                            sampler_temp=max(cfg.initial.temperature, ph.t_wall))
    left = build_wall(_wall(cfg.walls.left, ph.t_wall, 1), vgrid, ph.gas_const)
    right = build_wall(_wall(cfg.walls.right, ph.t_wall, -1), vgrid, ph.gas_const)
    vl = None
    if cfg.vlasov.enabled:
        vl = VlasovField(cfg.vlasov.epsilon, cfg.vlasov.gamma, ph.sigma, ph.mass)
    stepper = Stepper(ws, left, right, cfg.dt, vlasov=vl, resample=it.resample)
    return Problem(cfg, ws, stepper, initial_state(cfg, space, vgrid), vl)


@dataclass
class Record:
    values: dict


@dataclass
class RunResult:
    series: list
    snapshots: dict
    verdicts: dict
    details: dict
    final: SimulationState
    free_energy: np.ndarray = field(repr=False)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return all(v != FAIL for v in self.verdicts.values())


class Monitor:
    """Scalar diagnostics of a state, shared by the per-step check and the CSV rows."""

    def __init__(self, prob: Problem):
        self.prob = prob
        cfg = prob.cfg
        self.t_wall = cfg.physics.t_wall
        self.R = cfg.physics.gas_const
        self.mode = cfg.collisional_h.mode
        self.fw = wall_maxwellian(prob.vgrid, self.t_wall, self.R)

    def h_c(self, rho):
        ph = self.prob.cfg.physics
        return h_collisional(rho, self.prob.space, self.mode, ph.sigma, ph.mass)

    def free(self, f):
        vg, sp = self.prob.vgrid, self.prob.space
        rho = f.sum(axis=1) * vg.cell_volume
        hc = self.h_c(rho)
        pot = self.prob.vlasov.potential_energy(rho, sp) if self.prob.vlasov else 0.0
        F, Fp = free_energy(f, vg, sp, self.t_wall, self.R, hc, pot)
        return F, Fp, hc

    def row(self, state: SimulationState, prev):
        vg, sp = self.prob.vgrid, self.prob.space
        f = state.f
        m = moments(f, vg, self.R, t_vacuum=self.t_wall)
        F, Fp, hc = self.free(f)
        st = self.prob.stepper
        left = st.left.reflect(f[0])
        right = st.right.reflect(f[-1])
        dgl = dg_boundary_flux(left, vg, self.t_wall, self.R, 1)
        dgr = dg_boundary_flux(right, vg, self.t_wall, self.R, -1)
        if state.last_J is not None:
            J = state.last_J
            w = vg.cell_volume * sp.dx
            l1m = float(np.sum(J @ vg.nodes[:, 0]) * w)
            l1e = float(np.sum(J @ (0.5 * np.sum(vg.nodes ** 2, axis=1))) * w)
        else:
            l1m = l1e = 0.0
        mass = float(m.rho.sum() * sp.dx)
        t_mean = float((m.rho * m.temp).sum() / m.rho.sum())
        dF = (F - prev[1]) / (state.t - prev[0]) if prev is not None and state.t > prev[0] else 0.0
        return {
            "t": state.t, "mass": mass, "mom_x": float((m.rho * m.v[:, 0]).sum() * sp.dx),
            "E": total_energy(f, vg, sp), "Hk": h_kinetic(f, vg, sp), "Hc": hc,
            "F": F, "Fprime": Fp, "dF_dt": dF, "DG_flux_left": dgl, "DG_flux_right": dgr,
            "lemma1_mom": l1m, "lemma1_en": l1e, "T_mean": t_mean,
            "T_max_dev": float(np.max(np.abs(m.temp - self.t_wall)) / self.t_wall),
        }

    def snapshot(self, f):
        vg = self.prob.vgrid
        m = moments(f, vg, self.R, t_vacuum=self.t_wall)
        cf = collisional_fluxes(f, self.prob.ws)
        return {"x": self.prob.space.centers, "rho": m.rho, "v_x": m.v[:, 0], "T": m.temp,
                "pc_xx": cf.stress[:, 0, 0], "pc_yy": cf.stress[:, 1, 1], "qc_x": cf.heat[:, 0]}


def lower_bound(prob: Problem, mass: float, hc: float) -> float:
    """Gibbs bound on F' for fixed total mass: relative entropy against the
    wall Maxwellian is at least M ln(M / (L int f_w)), the potential energy at
    least K(0) M^2 / 2."""
    vg, sp = prob.vgrid, prob.space
    cfg = prob.cfg
    z = wall_maxwellian(vg, cfg.physics.t_wall, cfg.physics.gas_const).sum() * vg.cell_volume * sp.length
    b = cfg.physics.gas_const * cfg.physics.t_wall * (mass * math.log(mass / z) + hc)
    if prob.vlasov is not None:
        b += 0.5 * float(prob.vlasov.kernel(0.0)) * mass ** 2
    return b


def run(cfg: SimulationConfig, out_dir=None, progress=True, scenario: str | None = None,
        stream=None) -> RunResult:
    stream = stream or sys.stderr
    t_start = time.time()
    prob = build(cfg)
    mon = Monitor(prob)
    vg, sp = prob.vgrid, prob.space
    st = SimulationState(prob.f0.copy())
    n_steps = cfg.integrator.steps
    F0, Fp0, hc0 = mon.free(st.f)
    mass0 = float(st.f.sum() * vg.cell_volume * sp.dx)
    rho0 = st.f.sum(axis=1) * vg.cell_volume
    m0 = moments(st.f, vg, cfg.physics.gas_const, t_vacuum=cfg.physics.t_wall)

    guard = collision_stability(st.f, prob.ws, prob.stepper.dt, samples=prob.stepper.samples(0))
    growth = None
    if cfg.integrator.collision_mode == "mc" and not cfg.integrator.resample:
        # one sample set serves every step, so its linearization must not amplify
        growth = linear_growth(prob.ws, prob.stepper.dt, mass0 / sp.length, cfg.physics.t_wall,
                               samples=prob.stepper.samples(0))
    series = [mon.row(st, None)]
    prev = (st.t, F0)
    snaps = {0: mon.snapshot(st.f)} if _wants_snapshots(cfg) else {}
    Fs, Fps = [F0], [Fp0]
    clip_max = 0.0
    self_force = 0.0
    pot_frac = 0.0
    max_drift = 0.0
    dg_max = max(series[0]["DG_flux_left"], series[0]["DG_flux_right"])
    for n in range(n_steps):
        st = prob.stepper.step(st)
        F, Fp, hc = mon.free(st.f)
        Fs.append(F)
        Fps.append(Fp)
        clip_max = max(clip_max, st.clipped / mass0)
        if prob.vlasov is not None:
            rho = st.f.sum(axis=1) * vg.cell_volume
            acc = prob.vlasov.force(rho, sp)
            scale = float(np.sum(rho * np.abs(acc)) * sp.dx)
            tot = float(np.sum(rho * acc) * sp.dx)
            self_force = max(self_force, abs(tot) / scale if scale > 0 else 0.0)
            pot = prob.vlasov.potential_energy(rho, sp)
            pot_frac = max(pot_frac, abs(pot) / total_energy(st.f, vg, sp))
        if scenario == "equilibrium-hold":
            m = moments(st.f, vg, cfg.physics.gas_const, t_vacuum=cfg.physics.t_wall)
            c0 = math.sqrt(cfg.physics.gas_const * cfg.physics.t_wall)
            drift = max(np.max(np.abs(m.rho / m0.rho - 1)), np.max(np.abs(m.v)) / c0,
                        np.max(np.abs(m.temp / m0.temp - 1)))
            max_drift = max(max_drift, float(drift))
        if (n + 1) % cfg.output.every == 0 or n + 1 == n_steps:
            row = mon.row(st, prev)
            prev = (st.t, row["F"])
            series.append(row)
            dg_max = max(dg_max, row["DG_flux_left"], row["DG_flux_right"])
            if progress:
                print(f"step {n + 1}/{n_steps} t={st.t:.4g} F={row['F']:.10g} "
                      f"T_mean={row['T_mean']:.6g}", file=stream, flush=True)
        if _wants_snapshots(cfg) and (n + 1) % cfg.output.snapshot_every == 0:
            snaps[n + 1] = mon.snapshot(st.f)

    Fs = np.array(Fs)
    Fps = np.array(Fps)
    verdicts, details = _verdicts(cfg, prob, scenario, Fs, Fps, st, mass0, hc0, series,
                                  clip_max, self_force, max_drift, dg_max, guard, growth, pot_frac)
    res = RunResult(series, snaps, verdicts, details, st, Fs, time.time() - t_start)
    if out_dir is not None:
        write_outputs(res, cfg, Path(out_dir), scenario)
    return res


def _wants_snapshots(cfg):
    return "csv" in cfg.output.formats


def monotonicity(values, slack_floor=0.0):
    """(ok, worst increase, eps) with eps = 1e-3 |total change| / steps, floored."""
    values = np.asarray(values, dtype=float)
    steps = max(len(values) - 1, 1)
    eps = max(1e-3 * abs(values[0] - values[-1]) / steps, slack_floor)
    inc = np.diff(values)
    worst = float(inc.max()) if len(inc) else 0.0
    return worst <= eps, worst, eps


def _verdicts(cfg, prob, scenario, Fs, Fps, st, mass0, hc0, series, clip_max, self_force,
              max_drift, dg_max, guard, growth=None, pot_frac=0.0):
    v, d = {}, {}
    ph = cfg.physics
    # a rounding floor for the step slack, in units of R T_w M
    floor = 1e-13 * ph.gas_const * ph.t_wall * mass0 * max(1.0, abs(math.log(mass0)))
    series_F = Fps if prob.vlasov is not None else Fs
    ok, worst, eps = monotonicity(series_F, floor)
    d["monotonicity"] = {"worst_increase": worst, "eps_step": eps,
                         "quantity": "Fprime" if prob.vlasov is not None else "F"}
    if cfg.collisional_h.mode == CS_SURROGATE:
        v["monotonicity"] = INFO   # surrogate H is not the functional of the theorem
    else:
        v["monotonicity"] = PASS if ok else FAIL
    mass_end = float(st.f.sum() * prob.vgrid.cell_volume * prob.space.dx)
    drift = abs(mass_end / mass0 - 1)
    tol = 1e-10 * max(1.0, cfg.integrator.steps / 1000)
    d["mass"] = {"relative_drift": drift, "tolerance": tol}
    v["conservation"] = PASS if drift <= tol else FAIL
    d["dg"] = {"max_flux": dg_max, "tolerance": 1e-10}
    v["dg"] = PASS if dg_max <= 1e-10 else FAIL
    d["clipping"] = {"max_relative_clip": clip_max, "tolerance": 1e-8}
    v["clipping"] = PASS if clip_max <= 1e-8 else FAIL
    d["collision_stability"] = {"dt_nu": guard, "limit": 0.5}
    v["collision_stability"] = PASS if guard <= 0.5 else FAIL
    if growth is not None:
        d["sampled_operator"] = {"linear_growth_per_step": growth, "limit": GROWTH_LIMIT}
        v["sampled_operator"] = PASS if growth <= GROWTH_LIMIT else FAIL
    if cfg.collisional_h.mode == IDEAL:
        hcs = np.array([r["Hc"] for r in series])
        dev = float(np.max(np.abs(hcs - hcs[0])) / max(abs(hcs[0]), 1e-300))
        d["hc_constant"] = {"relative_deviation": dev, "tolerance": 1e-10}
        v["hc_constant"] = PASS if dev <= 1e-10 else FAIL
    if prob.vlasov is not None:
        d["potential_fraction"] = {"max_potential_over_kinetic": pot_frac, "limit": 0.1}
        v["potential_fraction"] = PASS if pot_frac <= 0.1 else FAIL
        d["self_force"] = {"max_relative": self_force, "tolerance": 1e-12}
        v["self_force"] = PASS if self_force <= 1e-12 else FAIL
        lb = lower_bound(prob, mass0, hc0)
        d["bounded_below"] = {"min_Fprime": float(Fps.min()), "bound": lb}
        v["bounded_below"] = PASS if Fps.min() >= lb and np.all(np.isfinite(Fps)) else FAIL
    if scenario in ("relax-boltzmann", "relax-vlasov", "relax-dense"):
        dev = abs(series[-1]["T_mean"] - ph.t_wall) / ph.t_wall
        d["final_temperature"] = {"relative_deviation": dev, "tolerance": 0.01}
        if scenario == "relax-boltzmann":
            v["final_temperature"] = PASS if dev <= 0.01 else FAIL
        else:
            v["final_temperature"] = INFO
    if scenario == "equilibrium-hold":
        steps = max(len(Fs) - 1, 1)
        _, _, eps = monotonicity(Fs, floor)
        flat = float(np.max(np.abs(Fs - Fs[0])))
        d["equilibrium"] = {"max_field_drift": max_drift, "drift_tolerance": 1e-6,
                            "max_F_change": flat, "F_tolerance": eps * steps}
        v["equilibrium"] = PASS if max_drift <= 1e-6 and flat <= eps * steps else FAIL
    return v, d


def write_outputs(res: RunResult, cfg: SimulationConfig, out: Path, scenario=None):
    out.mkdir(parents=True, exist_ok=True)
    formats = set(cfg.output.formats)
    files = []
    if "csv" in formats:
        with open(out / "timeseries.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=SERIES_COLUMNS)
            w.writeheader()
            for row in res.series:
                w.writerow({k: repr(float(row[k])) for k in SERIES_COLUMNS})
        files.append("timeseries.csv")
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        for step, snap in sorted(res.snapshots.items()):
            name = f"snapshot_{step:06d}.csv"
            with open(snap_dir / name, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(SNAPSHOT_COLUMNS)
                for i in range(len(snap["x"])):
                    w.writerow([repr(float(snap[c][i])) for c in SNAPSHOT_COLUMNS])
            files.append(f"snapshots/{name}")
    if "gnuplot" in formats:
        col = "Fprime" if cfg.vlasov.enabled else "F"
        idx = SERIES_COLUMNS.index(col) + 1
        (out / "plot_F.gp").write_text(
            "set datafile separator ','\n"
            "set key autotitle columnhead\n"
            "set xlabel 't'\n"
            f"set ylabel '{col}'\n"
            "set terminal pngcairo size 800,500\n"
            "set output 'free_energy.png'\n"
            f"plot 'timeseries.csv' using 1:{idx} with linespoints\n")
        files.append("plot_F.gp")
    np.save(out / "final_state.npy", res.final.f)
    files.append("final_state.npy")
    manifest = {
        "scenario": scenario,
        "config_hash": cfg.digest(),
        "version": __version__,
        "seeds": {"integrator": cfg.integrator.seed, "correlation": cfg.correlation.seed},
        "wall_clock_s": res.wall_clock,
        "steps": cfg.integrator.steps,
        "verdicts": res.verdicts,
        "details": res.details,
        "files": files,
        "config": cfg.to_dict(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float))
    return manifest
