import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from absfsim.config import ScenarioConfig
from absfsim.deployment import Kind, Node
from absfsim.propagation import (FEMTO_LINK, MACRO_LINK, ShadowingField, db_to_linear, dbm_to_mw,
                                 femto_pathloss, indoor_serving_pathloss, linear_to_db, link_rng,
                                 macro_pathloss, path_gain, pathloss_table, sample_shadowing)

distances = st.floats(min_value=0.1, max_value=1e4, allow_nan=False)


def test_macro_pathloss_reference_points():
    assert macro_pathloss(1.0) == 15.3
    assert macro_pathloss(100.0) == pytest.approx(90.5, abs=1e-12)
    assert macro_pathloss(100.0, rx_indoor=True) == pytest.approx(110.5, abs=1e-12)


def test_femto_pathloss_reference_points():
    assert femto_pathloss(1000.0) == 127.0
    assert femto_pathloss(10.0) == pytest.approx(67.0, abs=1e-12)
    assert femto_pathloss(100.0) == pytest.approx(97.0, abs=1e-12)


def test_indoor_serving_model():
    # 38.46 + 20 log10(10) + 7
    assert indoor_serving_pathloss(10.0) == pytest.approx(65.46, abs=1e-12)


@pytest.mark.parametrize("L_ow", [0.0, 10.0, 20.0, 35.5])
@given(d=distances)
def test_indoor_delta_equals_wall_loss(L_ow, d):
    assert macro_pathloss(d, True, L_ow) - macro_pathloss(d, False, L_ow) == pytest.approx(L_ow, abs=1e-9)


@given(a=distances, b=distances)
def test_pathloss_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert macro_pathloss(lo) <= macro_pathloss(hi)
    assert femto_pathloss(lo) <= femto_pathloss(hi)


@pytest.mark.parametrize("fn", [macro_pathloss, femto_pathloss, indoor_serving_pathloss])
@pytest.mark.parametrize("d", [0.0, -1.0])
def test_nonpositive_distance_rejected(fn, d):
    with pytest.raises(ValueError):
        fn(d)


def test_vectorised_matches_scalar():
    d = np.array([1.0, 7.5, 120.0, 480.0])
    indoor = np.array([False, True, False, True])
    vec = macro_pathloss(d, indoor, 10.0)
    assert np.array_equal(vec, [macro_pathloss(x, i, 10.0) for x, i in zip(d, indoor)])


@given(x=st.floats(min_value=-150, max_value=150))
def test_db_roundtrip(x):
    assert linear_to_db(db_to_linear(x)) == pytest.approx(x, abs=1e-9)


def test_dbm_to_mw():
    assert dbm_to_mw(46.0) == pytest.approx(39810.717055, rel=1e-9)
    assert dbm_to_mw(0.0) == 1.0


def test_noise_floor():
    assert ScenarioConfig().noise_power_dbm == pytest.approx(-95.0, abs=1e-12)


def test_shadowing_statistics():
    rng = np.random.default_rng(7)
    macro = sample_shadowing(MACRO_LINK, rng, size=100_000)
    femto = sample_shadowing(FEMTO_LINK, rng, size=100_000)
    assert abs(macro.mean()) < 0.1 and abs(macro.std() - 10.0) < 0.2
    assert abs(femto.mean()) < 0.1 and abs(femto.std() - 8.0) < 0.2


def test_zero_sigma_gives_zero_shadowing():
    cfg = ScenarioConfig(shadow_std_macro=0.0, shadow_std_femto=0.0)
    field = ShadowingField.draw(cfg, 3)
    assert not field.macro.any() and not field.femto.any()


def test_shadowing_frozen_per_run():
    cfg = ScenarioConfig()
    a, b = ShadowingField.draw(cfg, 5), ShadowingField.draw(cfg, 5)
    c = ShadowingField.draw(cfg, 6)
    assert np.array_equal(a.femto, b.femto) and np.array_equal(a.macro, b.macro)
    assert not np.array_equal(a.femto, c.femto)
    assert a.macro.shape == (50,) and a.femto.shape == (40, 50)


def test_link_rng_keys_are_independent():
    cfg = ScenarioConfig()
    assert link_rng(cfg, 0).random() != link_rng(cfg, 1).random()
    assert link_rng(cfg, 0, 4).random() == link_rng(cfg, 0, 4).random()


def test_path_gain_macro_link():
    cfg = ScenarioConfig()
    menb = Node("MeNB", Kind.MENB, (0.0, 0.0))
    mue = Node("MUE-0", Kind.MUE, (60.0, 80.0), False, "MeNB")
    link = path_gain(menb, mue, cfg)
    # 90.5 dB loss, 14 dBi MeNB antenna, no shadowing
    assert link.total_gain_db == pytest.approx(-76.5, abs=1e-12)
    assert link.total_gain_linear == pytest.approx(10 ** -7.65, rel=1e-12)


def test_path_gain_uses_distance_floor_and_indoor_flag():
    cfg = ScenarioConfig()
    henb = Node("HeNB-0", Kind.HENB, (5.0, 5.0), True)
    mue = Node("MUE-0", Kind.MUE, (5.0, 5.0), True, "MeNB")
    link = path_gain(henb, mue, cfg)
    assert link.pathloss == pytest.approx(femto_pathloss(cfg.min_distance))
    menb = Node("MeNB", Kind.MENB, (0.0, 0.0))
    d = math.hypot(5.0, 5.0)
    assert path_gain(menb, mue, cfg).pathloss == pytest.approx(macro_pathloss(d) + 20.0)


def test_path_gain_rejects_bad_pairs():
    cfg = ScenarioConfig()
    a = Node("MUE-0", Kind.MUE, (1.0, 0.0), False, "MeNB")
    b = Node("MUE-1", Kind.MUE, (2.0, 0.0), False, "MeNB")
    with pytest.raises(TypeError):
        path_gain(a, b, cfg)


def test_pathloss_table_columns():
    t = pathloss_table([1.0, 1000.0], L_ow=10.0)
    assert t.shape == (2, 4)
    assert t[0, 1] == 15.3 and t[0, 2] == pytest.approx(25.3)
    assert t[1, 3] == 127.0
