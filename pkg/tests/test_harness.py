import numpy as np
import pytest

from absfsim.absf import FrameConfig, MutingPlan, plan_from_rates
from absfsim.config import ScenarioConfig
from absfsim.deployment import generate_scenario
from absfsim.harness import (CSV_FILES, DEFAULT_SCHEMES, METRICS, NO_ABSF, PROPOSED, Scheme,
                             analyze_drop, parse_schemes, plan_for, protected_fraction,
                             run_experiment, run_single, score_outage, score_scheme,
                             score_throughput)
from absfsim.radio import PathGainMatrix, TxPowers, analyze, compute_sinr

from conftest import place

SMALL = ScenarioConfig(num_runs=6, num_steps=4)


def unit_report(n_henb=0):
    g = PathGainMatrix(("MUE-0",), tuple(f"HeNB-{j}" for j in range(n_henb)),
                       tuple(f"FUE-{j}" for j in range(n_henb)), np.array([1.0]),
                       np.zeros((1, n_henb)), np.zeros(n_henb), np.eye(n_henb), 1.0)
    return compute_sinr(g, TxPowers(1.0, np.ones(n_henb)))


def test_scheme_parsing_and_labels():
    assert [s.label for s in parse_schemes("proposed, fixed:0.1,fixed-agg-0.3, none")] == \
        ["proposed", "fixed-0.1", "fixed-agg-0.3", "no-absf"]
    assert [s.label for s in DEFAULT_SCHEMES] == ["proposed", "fixed-0.1", "fixed-0.2", "fixed-0.3", "no-absf"]
    with pytest.raises(ValueError):
        Scheme("fixed", 1.5)
    with pytest.raises(ValueError):
        Scheme.parse("sometimes")
    with pytest.raises(ValueError):
        parse_schemes("")


def test_unit_sinr_full_band_throughput():
    rep = unit_report()
    assert rep.gamma[0] == pytest.approx(1.0)
    mue, fue = score_throughput(rep, MutingPlan.empty((), FrameConfig()), FrameConfig(), 10e6)
    assert mue[0] == pytest.approx(1e4, rel=1e-12) and fue.size == 0


def test_fully_blanked_femto_has_zero_throughput():
    s = place([(300.0, 0.0)], [(100.0, 100.0)])
    rep = analyze(s)
    plan = plan_from_rates(rep.henb_ids, {"HeNB-1": 1.0}, FrameConfig())
    _, fue = score_throughput(rep, plan, FrameConfig(), 10e6)
    assert fue[0] == 0.0


def test_fue_throughput_scales_with_blanking():
    s = place([(300.0, 0.0)], [(100.0, 100.0), (-200.0, 50.0)])
    rep = analyze(s)
    frame = FrameConfig()
    _, base = score_throughput(rep, plan_from_rates(rep.henb_ids, {}, frame), frame, 10e6)
    _, cut = score_throughput(rep, plan_from_rates(rep.henb_ids, {"HeNB-2": 0.3}, frame), frame, 10e6)
    assert cut[0] == base[0] and cut[1] == pytest.approx(0.7 * base[1], rel=1e-12)


def test_protected_fraction_with_aligned_patterns():
    frame = FrameConfig()
    plan = plan_from_rates(("HeNB-1", "HeNB-2", "HeNB-3"), {"HeNB-1": 0.2, "HeNB-2": 0.2}, frame)
    mask = np.array([[True, True, False], [False, False, False], [True, False, True]])
    assert protected_fraction(plan, mask).tolist() == [0.2, 0.0, 0.0]


def test_score_outage():
    g = np.array([2.0, 0.5, 1.0, 0.3, 0.99, 3.0, 1.5, 1.0, 4.0, 2.0])
    assert score_outage(g, 1.0) == pytest.approx(0.3)
    assert score_outage(np.ones(4), 1.0) == 0.0
    excl = np.zeros(10, dtype=bool)
    excl[1] = True
    assert score_outage(g, 1.0, excl) == pytest.approx(0.2)


def test_no_femto_tier_outage_is_noise_limited_fraction():
    cfg = ScenarioConfig(num_henbs=0, num_mues=50, num_runs=3, num_steps=2, macro_radius=3000.0)
    rep = run_experiment(cfg, [NO_ABSF, PROPOSED])
    assert not rep.failures
    assert np.all(rep.trace("muted_rate", NO_ABSF) == 0)
    assert np.all(rep.trace("muted_rate", PROPOSED) == 0)
    for r in range(cfg.num_runs):
        report = analyze(generate_scenario(cfg, r))
        expected = float((report.gamma < report.gamma0).mean())
        assert rep.per_run("outage", NO_ABSF)[r, 0] == pytest.approx(expected)
    assert rep.mean("outage")[0, 0] > 0


def test_proposed_has_no_feasible_outage():
    rep = run_experiment(ScenarioConfig(num_runs=20, num_steps=5, num_mues=20, num_henbs=80),
                         [PROPOSED, Scheme("fixed", 0.1)])
    assert np.all(rep.mean("outage")[0] == 0)
    assert rep.mean("outage")[1].max() > 0


def test_fixed_scope():
    drop = analyze_drop(generate_scenario(ScenarioConfig(num_mues=20, num_henbs=80), 1))
    every = plan_for(Scheme("fixed", 0.2), drop)
    agg = plan_for(Scheme("fixed", 0.2, scope="aggressors"), drop)
    assert np.all(every.blank_fraction == 0.2)
    active = np.array([bool(drop.victim_sets[f]) for f in drop.report.henb_ids])
    assert np.all(agg.blank_fraction[active] == 0.2) and np.all(agg.blank_fraction[~active] == 0)
    assert not plan_for(NO_ABSF, drop).bitmaps.any()


def test_metric_ranges():
    rep = run_experiment(SMALL)
    v = rep.values
    assert v.shape == (6, 5, 5, len(METRICS))
    assert np.all(np.isfinite(v))
    for m in ("muted_rate", "outage", "outage_all", "outage_feasible", "infeasible", "required_rate"):
        x = rep.mean(m)
        assert np.all((0 <= x) & (x <= 1))
    assert np.all(rep.mean("mue_throughput") >= 0) and np.all(rep.mean("fue_throughput") >= 0)


def test_deterministic_and_worker_independent(tmp_path):
    a = run_experiment(SMALL)
    b = run_experiment(SMALL, workers=2)
    assert np.array_equal(a.values, b.values)
    for metric in CSV_FILES.values():
        assert a.csv_text(metric) == b.csv_text(metric)
    paths = a.write(tmp_path)
    assert sorted(p.name for p in paths) == sorted([*CSV_FILES, "summary.json"])
    assert (tmp_path / "outage.csv").read_text().splitlines()[0] == "scheme,step,mean,stddev,n"


def test_run_failure_is_reported(monkeypatch):
    import absfsim.harness as h

    def boom(*args, **kw):
        raise RuntimeError("bad drop")

    monkeypatch.setattr(h, "analyze_drop", boom)
    values, failure = run_single(SMALL, [PROPOSED], 2)
    assert failure is not None and failure.run == 2 and failure.step == 0
    assert "bad drop" in str(failure) and np.all(np.isnan(values))


def test_least_norm_engine_matches_closed_form():
    cfg = ScenarioConfig(num_runs=4, num_steps=3)
    a = run_experiment(cfg, [PROPOSED])
    b = run_experiment(cfg.replace(rate_engine="least_norm"), [PROPOSED])
    assert np.allclose(a.mean("required_rate"), b.mean("required_rate"), atol=1e-9)


def test_score_scheme_on_crafted_drop():
    s = place([(300.0, 0.0)], [(305.0, 0.0)], shadow_std_macro=0.0, shadow_std_femto=0.0)
    drop = analyze_drop(s)
    v = dict(zip(METRICS, score_scheme(drop, PROPOSED, 10e6)))
    assert v["outage"] == 0.0 and v["muted_rate"] > 0
    w = dict(zip(METRICS, score_scheme(drop, NO_ABSF, 10e6)))
    assert w["outage"] == 1.0 and w["muted_rate"] == 0.0


def test_shadow_free_far_mues_need_no_muting():
    """Without shadowing no MUE beyond the interference range is a victim."""
    from absfsim.radio import interference_range
    cfg = ScenarioConfig(shadow_std_macro=0.0, shadow_std_femto=0.0, num_runs=40, num_steps=30)
    r_int = interference_range(cfg)
    far = 0
    for run in range(cfg.num_runs):
        def check(scenario, drop):
            nonlocal far
            d = np.linalg.norm(scenario.mue_xy[:, None] - scenario.henb_xy[None], axis=2).min(axis=1)
            beyond = d > r_int
            far += int(beyond.sum())
            assert not drop.report.victim_mask[beyond].any()
        _, failure = run_single(cfg, [PROPOSED], run, check)
        assert failure is None
    assert far > 0


def test_interference_range_is_tight_for_a_single_henb():
    from absfsim.radio import interference_range
    cfg = ScenarioConfig(num_henbs=1, num_mues=1, shadow_std_macro=0.0, shadow_std_femto=0.0)
    r = interference_range(cfg)
    R = cfg.macro_radius
    edge = (R - 1e-6, 0.0)
    inside = analyze(place([edge], [(R - r * 0.999, 0.0)], shadow_std_macro=0.0, shadow_std_femto=0.0))
    outside = analyze(place([edge], [(R - r * 1.001, 0.0)], shadow_std_macro=0.0, shadow_std_femto=0.0))
    assert inside.victim_mask[0] and not outside.victim_mask[0]
    assert interference_range(cfg.replace(num_henbs=0)) == 0.0
