import io

import numpy as np
import pytest

from absfsim.config import ConfigError, ScenarioConfig
from absfsim.deployment import (Kind, Node, Scenario, advance_step, generate_scenario, indoor_mask,
                                ray_exit, read_scenario, strongest_interferer, write_scenario)
from absfsim.propagation import ShadowingField

from conftest import place


def test_empty_femto_tier():
    s = generate_scenario(ScenarioConfig(num_henbs=0, num_mues=1), 0)
    assert len(s.nodes) == 2
    assert [n.kind for n in s.nodes] == [Kind.MENB, Kind.MUE]


def test_default_node_count():
    s = generate_scenario(ScenarioConfig(num_mues=10, num_henbs=40), 0)
    assert len(s.nodes) == 91
    assert len(s.mues) == 10 and len(s.henbs) == 40 and len(s.fues) == 40


def test_generation_is_deterministic():
    cfg = ScenarioConfig()
    assert generate_scenario(cfg, 17) == generate_scenario(cfg, 17)
    assert generate_scenario(cfg, 17) != generate_scenario(cfg, 18)
    assert generate_scenario(cfg, 17) != generate_scenario(cfg.replace(rng_seed=1), 17)


@pytest.mark.parametrize("run", range(5))
def test_geometry_contract(run):
    cfg = ScenarioConfig(num_mues=30, num_henbs=60)
    s = generate_scenario(cfg, run)
    for n in s.nodes:
        assert np.hypot(*n.position) <= cfg.macro_radius + 1e-9
    half = cfg.apartment_size / 2
    assert np.all(np.abs(s.fue_xy - s.henb_xy) <= half)
    assert all(f.indoor and f.serving == h.id for f, h in zip(s.fues, s.henbs))
    assert all(m.serving == "MeNB" for m in s.mues)
    expected = indoor_mask(s.mue_xy, s.henb_xy, cfg.apartment_size)
    assert [m.indoor for m in s.mues] == list(expected)


def test_run_index_out_of_range():
    with pytest.raises(IndexError):
        generate_scenario(ScenarioConfig(num_runs=3), 3)


def test_invalid_config_names_field():
    with pytest.raises(ConfigError) as err:
        ScenarioConfig(macro_radius=-1.0)
    assert err.value.field == "macro_radius"


def test_scenario_invariants_enforced():
    cfg = ScenarioConfig(num_mues=1, num_henbs=1, num_runs=1)
    menb = Node("MeNB", Kind.MENB, (0.0, 0.0))
    mue = Node("MUE-0", Kind.MUE, (1.0, 0.0), False, "MeNB")
    henb = Node("HeNB-0", Kind.HENB, (50.0, 0.0), True)
    with pytest.raises(ValueError):
        Scenario(cfg, (menb, mue, henb))              # HeNB without FUE
    with pytest.raises(ValueError):
        Scenario(cfg, (menb, mue, mue))               # duplicate id
    with pytest.raises(ValueError):
        Scenario(cfg, (menb, Node("MUE-0", Kind.MUE, (1.0, 0.0), False, "HeNB-0"),
                       henb, Node("FUE-0", Kind.FUE, (51.0, 0.0), True, "HeNB-0")))


def test_advance_moves_away_from_strongest_interferer():
    s = place([(120.0, 0.0)], [(100.0, 0.0), (300.0, 0.0)],
              shadow_std_macro=0.0, shadow_std_femto=0.0, num_steps=5)
    assert strongest_interferer(s).tolist() == [0]
    s1 = advance_step(s)
    x, y = s1.mue_xy[0]
    assert y == pytest.approx(0.0, abs=1e-12) and x >= 120.0
    assert s1.step_index == 1
    assert s1.henbs == s.henbs and s1.fues == s.fues and s1.menb == s.menb


def test_advance_without_henbs_only_bumps_step():
    s = generate_scenario(ScenarioConfig(num_henbs=0, num_mues=3), 0)
    s1 = advance_step(s)
    assert s1.step_index == 1 and s1.nodes == s.nodes


def test_step_budget():
    cfg = ScenarioConfig(num_steps=2)
    s = advance_step(advance_step(generate_scenario(cfg, 0)))
    with pytest.raises(IndexError):
        advance_step(s)


@pytest.mark.parametrize("run", range(20))
def test_advance_is_monotone_and_stays_in_disc(run):
    cfg = ScenarioConfig(num_steps=10)
    shadow = ShadowingField.draw(cfg, run)
    s = generate_scenario(cfg, run)
    for _ in range(cfg.num_steps):
        target = strongest_interferer(s, shadow)
        before = np.linalg.norm(s.mue_xy - s.henb_xy[target], axis=1)
        s = advance_step(s, shadow)
        after = np.linalg.norm(s.mue_xy - s.henb_xy[target], axis=1)
        assert np.all(after >= before - 1e-9)
        assert np.all(np.hypot(*s.mue_xy.T) <= cfg.macro_radius + 1e-9)


def test_advance_is_deterministic():
    cfg = ScenarioConfig()
    a = advance_step(generate_scenario(cfg, 4))
    b = advance_step(generate_scenario(cfg, 4))
    assert a == b


def test_mean_displacement():
    """Away from the boundary the mean move equals step_distance."""
    cfg = ScenarioConfig(num_steps=1, macro_radius=5000.0, num_runs=400, num_mues=10, num_henbs=5)
    moves = []
    for run in range(cfg.num_runs):
        s = generate_scenario(cfg, run)
        s1 = advance_step(s)
        moves.append(np.linalg.norm(s1.mue_xy - s.mue_xy, axis=1))
    moves = np.concatenate(moves)
    # Uniform(0, 20): mean 10, sd 20/sqrt(12); boundary clipping is rare at R = 5 km
    se = 20.0 / np.sqrt(12.0) / np.sqrt(moves.size)
    assert abs(moves.mean() - cfg.step_distance) < 4 * se + 0.05


def test_min_distance_grows_over_steps():
    cfg = ScenarioConfig(num_steps=30, num_runs=200)
    first, last = [], []
    for run in range(cfg.num_runs):
        shadow = ShadowingField.draw(cfg, run)
        s = generate_scenario(cfg, run)
        first.append(np.linalg.norm(s.mue_xy[:, None] - s.henb_xy[None], axis=2).min(axis=1))
        for _ in range(cfg.num_steps):
            s = advance_step(s, shadow)
        last.append(np.linalg.norm(s.mue_xy[:, None] - s.henb_xy[None], axis=2).min(axis=1))
    first, last = np.concatenate(first), np.concatenate(last)
    assert last.mean() > first.mean() + 10.0


def test_ray_exit():
    assert ray_exit(np.array([0.0, 0.0]), np.array([1.0, 0.0]), 10.0) == pytest.approx(10.0)
    assert ray_exit(np.array([10.0, 0.0]), np.array([1.0, 0.0]), 10.0) == pytest.approx(0.0)
    assert ray_exit(np.array([5.0, 0.0]), np.array([-1.0, 0.0]), 10.0) == pytest.approx(15.0)


def test_export_roundtrip():
    cfg = ScenarioConfig()
    s = advance_step(generate_scenario(cfg, 2))
    buf = io.StringIO()
    write_scenario(s, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# run 2 step 1" and len(lines) == 2 + 91
    back = read_scenario(lines, cfg)
    assert back.nodes == s.nodes
    assert (back.run_index, back.step_index) == (2, 1)


def test_read_rejects_malformed_line():
    with pytest.raises(ValueError):
        read_scenario(["MeNB MeNB 0 0"], ScenarioConfig())
