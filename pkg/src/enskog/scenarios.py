"""Preset configurations for the named scenarios."""
from __future__ import annotations

import copy

from .config import SimulationConfig, apply_overrides, from_dict

# Each preset is a partial config table; unspecified keys keep their defaults.
PRESETS = {
    # dilute hot start relaxing against diffuse walls at T_w
    "relax-boltzmann": {
        "geometry": {"length": 64.0, "n_cells": 16},
        "velocity": {"xi_max": 6.2, "n_per_axis": 16},
        "sphere": {"order": 4},
        "physics": {"sigma": 1.0, "t_wall": 1.0},
        "initial": {"density": 0.0118, "temperature": 1.5},
        "correlation": {"kind": "unity"},
        "collisional_h": {"mode": "ideal"},
        "integrator": {"cfl": 0.9, "steps": 600, "collision_mode": "mc", "samples": 32, "seed": 7},
        "output": {"every": 10, "snapshot_every": 100},
    },
    # resting wall Maxwellian; sigma < dx/2 so every contact partner lies inside the slab
    "equilibrium-hold": {
        "geometry": {"length": 32.0, "n_cells": 8},
        "velocity": {"xi_max": 5.0, "n_per_axis": 8},
        "sphere": {"order": 4},
        "physics": {"sigma": 1.0, "t_wall": 1.0},
        "initial": {"density": 0.0118, "temperature": 1.0},
        "integrator": {"cfl": 0.9, "steps": 1000, "collision_mode": "mc", "samples": 64, "seed": 3},
        "output": {"every": 50, "snapshot_every": 500},
    },
    # moderately dense gas, Carnahan-Starling contact value with its labeled surrogate H
    "relax-dense": {
        "geometry": {"length": 16.0, "n_cells": 16},
        "velocity": {"xi_max": 6.2, "n_per_axis": 12},
        "sphere": {"order": 4},
        "physics": {"sigma": 1.0, "t_wall": 1.0},
        "initial": {"density": 0.15, "temperature": 1.5},
        "correlation": {"kind": "contact_cs"},
        "collisional_h": {"mode": "cs_surrogate"},
        "integrator": {"cfl": 0.3, "steps": 300, "collision_mode": "mc", "samples": 32, "seed": 11},
        "output": {"every": 10, "snapshot_every": 100},
    },
    # weak Sutherland attraction on a modulated density; potential energy a few % of kinetic
    "relax-vlasov": {
        "geometry": {"length": 64.0, "n_cells": 16},
        "velocity": {"xi_max": 6.2, "n_per_axis": 12},
        "sphere": {"order": 4},
        "physics": {"sigma": 1.0, "t_wall": 1.0},
        "initial": {"density": 0.0118, "temperature": 1.5, "profile": "sine", "amplitude": 0.3},
        "correlation": {"kind": "unity"},
        "collisional_h": {"mode": "ideal"},
        "vlasov": {"enabled": True, "epsilon": 1.0, "gamma": 6.0},
        "integrator": {"cfl": 0.9, "steps": 400, "collision_mode": "mc", "samples": 32, "seed": 5},
        "output": {"every": 10, "snapshot_every": 100},
    },
}

SCENARIOS = tuple(PRESETS)


def preset(name: str, overrides=()) -> SimulationConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
    return from_dict(apply_overrides(copy.deepcopy(PRESETS[name]), overrides))
