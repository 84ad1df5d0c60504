"""Run configuration: TOML in, validated dataclasses out, and back again."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass

import tomli
import tomli_w

from .boundary import CL, MAXWELL, WALL_KINDS
from .correlation import CONFIG_ORACLE, CONTACT_CS, ETA_MAX, KINDS
from .diagnostics import HC_MODES, PAIRING


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass
class Geometry:
    length: float = 64.0
    n_cells: int = 16


@dataclass
class Velocity:
    xi_max: float = 6.2
    n_per_axis: int = 16


@dataclass
class Sphere:
    order: int = 4


@dataclass
class Physics:
    sigma: float = 1.0
    mass: float = 1.0
    gas_const: float = 1.0
    t_wall: float = 1.0


@dataclass
class Initial:
    density: float = 0.0118
    temperature: float = 1.5
    velocity_x: float = 0.0
    profile: str = "uniform"      # uniform | sine
    amplitude: float = 0.0        # relative density modulation for "sine"


@dataclass
class Correlation:
    kind: str = "unity"
    n_particles: int = 2
    samples: int = 20000
    seed: int = 0


@dataclass
class CollisionalH:
    mode: str = "ideal"


@dataclass
class Wall:
    kind: str = "diffuse"
    accommodation: float = 1.0
    alpha_n: float = 1.0
    alpha_t: float = 1.0


@dataclass
class Walls:
    left: Wall = field(default_factory=Wall)
    right: Wall = field(default_factory=Wall)


@dataclass
class Vlasov:
    enabled: bool = False
    epsilon: float = 0.0
    gamma: float = 6.0


@dataclass
class Integrator:
    dt: float = 0.0            # 0 -> cfl * dx / xi_max
    cfl: float = 0.9
    steps: int = 600
    collision_mode: str = "mc"
    samples: int = 32
    seed: int = 0
    resample: bool = False     # draw a fresh MC sample set every step


@dataclass
class Output:
    directory: str = "runs"
    every: int = 10
    snapshot_every: int = 100
    formats: list = field(default_factory=lambda: ["csv", "json", "gnuplot"])


@dataclass
class SimulationConfig:
    geometry: Geometry = field(default_factory=Geometry)
    velocity: Velocity = field(default_factory=Velocity)
    sphere: Sphere = field(default_factory=Sphere)
    physics: Physics = field(default_factory=Physics)
    initial: Initial = field(default_factory=Initial)
    correlation: Correlation = field(default_factory=Correlation)
    collisional_h: CollisionalH = field(default_factory=CollisionalH)
    walls: Walls = field(default_factory=Walls)
    vlasov: Vlasov = field(default_factory=Vlasov)
    integrator: Integrator = field(default_factory=Integrator)
    output: Output = field(default_factory=Output)

    @property
    def dx(self) -> float:
        return self.geometry.length / self.geometry.n_cells

    @property
    def dt(self) -> float:
        it = self.integrator
        return it.dt if it.dt > 0 else it.cfl * self.dx / self.velocity.xi_max

    def to_dict(self) -> dict:
        return asdict(self)

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


_FORMATS = {"csv", "json", "gnuplot"}


def _build(cls, data, path, problems):
    """Instantiate dataclass ``cls`` from ``data``, recording unknown keys and type errors."""
    obj = cls()
    if not isinstance(data, dict):
        problems.append(f"{path or 'config'}: expected a table")
        return obj
    known = {f.name: f for f in fields(cls)}
    for key, val in data.items():
        where = f"{path}.{key}" if path else key
        if key not in known:
            problems.append(f"{where}: unknown key")
            continue
        cur = getattr(obj, key)
        if is_dataclass(cur):
            setattr(obj, key, _build(type(cur), val, where, problems))
        elif isinstance(cur, bool):
            if not isinstance(val, bool):
                problems.append(f"{where}: expected true/false, got {val!r}")
            else:
                setattr(obj, key, val)
        elif isinstance(cur, int):
            if isinstance(val, bool) or not isinstance(val, int):
                problems.append(f"{where}: expected an integer, got {val!r}")
            else:
                setattr(obj, key, val)
        elif isinstance(cur, float):
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                problems.append(f"{where}: expected a number, got {val!r}")
            else:
                setattr(obj, key, float(val))
        elif isinstance(cur, list):
            if not isinstance(val, list):
                problems.append(f"{where}: expected a list, got {val!r}")
            else:
                setattr(obj, key, list(val))
        else:
            if not isinstance(val, str):
                problems.append(f"{where}: expected a string, got {val!r}")
            else:
                setattr(obj, key, val)
    return obj


def _check(cfg: SimulationConfig) -> list:
    p = []
    g, v, ph, ini, it = cfg.geometry, cfg.velocity, cfg.physics, cfg.initial, cfg.integrator

    def need(cond, msg):
        if not cond:
            p.append(msg)

    need(g.length > 0, "geometry.length: must be > 0")
    need(g.n_cells >= 2, "geometry.n_cells: must be >= 2")
    need(v.xi_max > 0, "velocity.xi_max: must be > 0")
    need(v.n_per_axis >= 4 and v.n_per_axis % 2 == 0,
         "velocity.n_per_axis: must be even and >= 4 (an odd count breaks xi -> -xi symmetry)")
    need(cfg.sphere.order >= 2, "sphere.order: must be >= 2")
    for name in ("sigma", "mass", "gas_const", "t_wall"):
        need(getattr(ph, name) > 0, f"physics.{name}: must be > 0")
    need(ini.density > 0, "initial.density: must be > 0")
    need(ini.temperature > 0, "initial.temperature: must be > 0")
    need(ini.profile in ("uniform", "sine"), "initial.profile: must be 'uniform' or 'sine'")
    need(0 <= ini.amplitude < 1, "initial.amplitude: must lie in [0, 1)")
    if ph.gas_const > 0 and ini.temperature > 0 and ph.t_wall > 0:
        t_max = max(ini.temperature, ph.t_wall)
        floor = 5 * math.sqrt(ph.gas_const * t_max)
        need(v.xi_max >= floor,
             f"velocity.xi_max: {v.xi_max:g} < 5 sqrt(R T_max) = {floor:.4g} (tail truncation)")
    c = cfg.correlation
    need(c.kind in KINDS, f"correlation.kind: must be one of {KINDS}")
    need(c.kind != CONFIG_ORACLE,
         "correlation.kind: the N-body oracle is a diagnostic and cannot drive the collision operator")
    need(c.n_particles >= 2, "correlation.n_particles: must be >= 2")
    need(c.samples >= 1, "correlation.samples: must be >= 1")
    hc = cfg.collisional_h.mode
    need(hc in HC_MODES, f"collisional_h.mode: must be one of {HC_MODES}")
    if c.kind in KINDS and hc in HC_MODES and PAIRING[c.kind] != hc:
        p.append(f"collisional_h.mode: correlation {c.kind!r} must be paired with {PAIRING[c.kind]!r} "
                 f"(pairing rule), got {hc!r}")
    if c.kind == CONTACT_CS and ph.sigma > 0 and ph.mass > 0:
        peak = ini.density * (1 + ini.amplitude)
        eta = math.pi * ph.sigma ** 3 * peak / (6 * ph.mass)
        need(eta < ETA_MAX, f"initial.density: packing fraction {eta:.3f} >= {ETA_MAX}")
    for side in ("left", "right"):
        w = getattr(cfg.walls, side)
        need(w.kind in WALL_KINDS, f"walls.{side}.kind: must be one of {WALL_KINDS}")
        if w.kind == MAXWELL:
            need(0 < w.accommodation <= 1,
                 f"walls.{side}.accommodation: must lie in (0, 1] (a = 0 is specular, excluded)")
        if w.kind == CL:
            need(0 < w.alpha_n <= 1, f"walls.{side}.alpha_n: must lie in (0, 1]")
            need(0 < w.alpha_t < 2, f"walls.{side}.alpha_t: must lie in (0, 2)")
    vl = cfg.vlasov
    need(vl.epsilon >= 0, "vlasov.epsilon: must be >= 0")
    need(vl.gamma > 3, "vlasov.gamma: must be > 3")
    need(0 < it.cfl <= 0.9, "integrator.cfl: must lie in (0, 0.9]")
    need(it.dt >= 0, "integrator.dt: must be >= 0 (0 selects the CFL step)")
    if it.dt > 0 and g.n_cells >= 2 and v.xi_max > 0 and g.length > 0:
        lim = it.cfl * cfg.dx / v.xi_max
        need(it.dt <= lim * (1 + 1e-12), f"integrator.dt: {it.dt:g} violates CFL bound {lim:.4g}")
    need(it.steps >= 0, "integrator.steps: must be >= 0")
    need(it.collision_mode in ("full", "mc"), "integrator.collision_mode: must be 'full' or 'mc'")
    need(it.samples >= 1, "integrator.samples: must be >= 1")
    o = cfg.output
    need(o.every >= 1, "output.every: must be >= 1")
    need(o.snapshot_every >= 1, "output.snapshot_every: must be >= 1")
    bad = set(o.formats) - _FORMATS
    need(not bad, f"output.formats: unknown {sorted(bad)}")
    return p


def from_dict(data: dict) -> SimulationConfig:
    problems = []
    cfg = _build(SimulationConfig, data, "", problems)
    problems += _check(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def parse_value(text: str):
    """Interpret an override value as a TOML scalar, falling back to a bare string."""
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_overrides(data: dict, overrides) -> dict:
    data = copy.deepcopy(data)
    problems = []
    for item in overrides or ():
        if "=" not in item:
            problems.append(f"override {item!r}: expected key=value")
            continue
        key, val = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                problems.append(f"override {item!r}: {part} is not a table")
                break
        else:
            node[parts[-1]] = parse_value(val.strip())
    if problems:
        raise ConfigError(problems)
    return data


def loads(text: str, overrides=()) -> SimulationConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([f"TOML syntax: {exc}"]) from exc
    return from_dict(apply_overrides(data, overrides))


def parse_config(path, overrides=()) -> SimulationConfig:
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode()
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror}"]) from exc
    return loads(text, overrides)
