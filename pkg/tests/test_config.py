import pytest
from hypothesis import given, strategies as st

from enskog.config import ConfigError, SimulationConfig, apply_overrides, from_dict, loads, parse_config
from enskog.scenarios import PRESETS, preset


def test_minimal_file_gives_defaults():
    cfg = loads("")
    assert cfg == SimulationConfig()
    assert loads("[geometry]\nlength = 64.0\n").geometry.length == 64.0


def test_odd_velocity_count_rejected():
    with pytest.raises(ConfigError, match="symmetry"):
        loads("[velocity]\nn_per_axis = 15\n")


def test_pairing_rule_enforced():
    text = '[correlation]\nkind = "contact_cs"\n[collisional_h]\nmode = "config_oracle"\n'
    with pytest.raises(ConfigError, match="pairing rule"):
        loads(text)


def test_every_problem_reported():
    text = ('[geometry]\nlength = -1.0\nbogus = 3\n[velocity]\nn_per_axis = 7\n'
            '[integrator]\ncfl = 2.0\nsteps = "many"\n[extra]\nx = 1\n')
    with pytest.raises(ConfigError) as info:
        loads(text)
    probs = info.value.problems
    for key in ("geometry.length", "geometry.bogus", "velocity.n_per_axis", "integrator.cfl",
                "integrator.steps", "extra"):
        assert any(p.startswith(key) for p in probs), key
    assert len(probs) == 6


def test_types_checked():
    with pytest.raises(ConfigError, match="integer"):
        loads("[geometry]\nn_cells = 4.5\n")
    with pytest.raises(ConfigError, match="true/false"):
        loads("[vlasov]\nenabled = 1\n")


def test_tail_truncation_rule():
    with pytest.raises(ConfigError, match="tail"):
        loads("[velocity]\nxi_max = 3.0\n")


def test_syntax_error_and_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="TOML"):
        loads("[geometry\n")
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "absent.toml")


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_round_trip(name):
    cfg = preset(name)
    again = loads(cfg.to_toml())
    assert again == cfg
    assert again.to_toml() == cfg.to_toml()
    assert again.digest() == cfg.digest()


@given(length=st.floats(1.0, 1e3), cells=st.integers(2, 64), nv=st.integers(2, 12).map(lambda k: 2 * k),
       temp=st.floats(0.2, 2.0), seed=st.integers(0, 2**31), wall=st.sampled_from(["diffuse", "maxwell"]),
       acc=st.floats(0.01, 1.0), steps=st.integers(0, 10**6))
def test_round_trip_identity(length, cells, nv, temp, seed, wall, acc, steps):
    data = {"geometry": {"length": length, "n_cells": cells},
            "velocity": {"n_per_axis": nv, "xi_max": 5.0 * max(temp, 1.0) ** 0.5 + 0.1},
            "initial": {"temperature": temp},
            "walls": {"left": {"kind": wall, "accommodation": acc}},
            "integrator": {"seed": seed, "steps": steps}}
    cfg = from_dict(data)
    assert loads(cfg.to_toml()) == cfg


def test_overrides():
    cfg = preset("relax-boltzmann", ["integrator.steps=5", "walls.left.kind=\"maxwell\"",
                                     "walls.left.accommodation=0.5", "vlasov.enabled=true"])
    assert cfg.integrator.steps == 5 and cfg.walls.left.kind == "maxwell"
    assert cfg.vlasov.enabled is True
    with pytest.raises(ConfigError, match="key=value"):
        apply_overrides({}, ["integrator.steps"])
    with pytest.raises(ConfigError, match="unknown key"):
        preset("relax-boltzmann", ["integrator.nope=1"])
    with pytest.raises(KeyError):
        preset("no-such-scenario")


def test_digest_tracks_content():
    a, b = preset("equilibrium-hold"), preset("equilibrium-hold", ["integrator.seed=4"])
    assert a.digest() != b.digest()
    assert a.digest() == preset("equilibrium-hold").digest()
