"""Monte-Carlo evaluation of muting schemes.

Every run draws one drop, then repeatedly moves the MUEs away from their
strongest interferer. At each step the same drop is scored under every
scheme (paired comparison):

* ``proposed``: per-victim closed-form rates, max rule per HeNB, coalition
  alignment;
* ``fixed``: one rate for every HeNB (``scope="all"``, the usual fixed-ABS
  baseline) or only for aggressor HeNBs (``scope="aggressors"``);
* ``none``: no blanking.

Throughput is a Shannon full-buffer model; MUE SINR after muting scales
each HeNB's interference by its blanked fraction.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .absf import (FrameConfig, MutedRateRequirement, MutingPlan, aggregate_per_henb,
                   muted_sinr, plan_from_rates, report_rates_least_norm, required_rates)
from .coalition import (Coalition, align_coalition_patterns, coalition_offsets,
                        collect_victim_sets, group_coalitions)
from .config import ScenarioConfig
from .deployment import Scenario, advance_step, generate_scenario
from .propagation import ShadowingField, linear_to_db
from .radio import SinrReport, analyze

log = logging.getLogger(__name__)

# SINR counts as meeting the threshold within this margin (dB)
SINR_TOL_DB = 1e-9


@dataclass(frozen=True)
class Scheme:
    kind: str                    # "proposed" | "fixed" | "none"
    alpha: float | None = None
    label: str = ""
    scope: str = "all"           # fixed only: "all" HeNBs or "aggressors"

    def __post_init__(self):
        if self.kind not in ("proposed", "fixed", "none"):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "fixed":
            if self.alpha is None or not 0.0 <= self.alpha <= 1.0:
                raise ValueError(f"fixed rate must lie in [0, 1], got {self.alpha!r}")
            if self.scope not in ("all", "aggressors"):
                raise ValueError(f"unknown fixed-rate scope {self.scope!r}")
        if not self.label:
            if self.kind == "fixed":
                label = f"fixed-{self.alpha:g}" if self.scope == "all" else f"fixed-agg-{self.alpha:g}"
            else:
                label = {"proposed": "proposed", "none": "no-absf"}[self.kind]
            object.__setattr__(self, "label", label)

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        """``proposed``, ``none`` / ``no-absf``, ``fixed:0.2`` (all HeNBs) or
        ``fixed-agg:0.2`` (aggressors only); ``-`` works in place of ``:``."""
        t = text.strip().lower()
        if t in ("proposed", "optimal"):
            return cls("proposed")
        if t in ("none", "no-absf", "noabsf"):
            return cls("none")
        for prefix, scope in (("fixed-agg", "aggressors"), ("fixed", "all")):
            if t.startswith(prefix) and t[len(prefix):len(prefix) + 1] in (":", "-", "="):
                try:
                    return cls("fixed", float(t[len(prefix) + 1:]), scope=scope)
                except ValueError:
                    break
        raise ValueError(f"cannot parse scheme {text!r}")


PROPOSED = Scheme("proposed")
NO_ABSF = Scheme("none")
DEFAULT_SCHEMES = (PROPOSED, Scheme("fixed", 0.1), Scheme("fixed", 0.2), Scheme("fixed", 0.3), NO_ABSF)


def parse_schemes(text: str | Iterable[str]) -> tuple[Scheme, ...]:
    items = text.split(",") if isinstance(text, str) else list(text)
    schemes = tuple(Scheme.parse(s) for s in items if s.strip())
    if not schemes:
        raise ValueError("at least one scheme is required")
    return schemes


# -- one drop --------------------------------------------------------------

@dataclass(frozen=True)
class DropAnalysis:
    """Scheme-independent state of one (run, step)."""

    report: SinrReport
    requirements: tuple[MutedRateRequirement, ...]
    victim_sets: dict
    coalitions: tuple[Coalition, ...]
    frame: FrameConfig
    offsets: dict

    @property
    def infeasible(self) -> np.ndarray:
        bad = {r.mue_id for r in self.requirements if not r.feasible}
        return np.array([m in bad for m in self.report.mue_ids], dtype=bool)

    @property
    def required_alpha(self) -> np.ndarray:
        """Closed-form rate per MUE (0 for non-victims)."""
        by_id = {r.mue_id: r.alpha for r in self.requirements}
        return np.array([by_id.get(m, 0.0) for m in self.report.mue_ids])


def analyze_drop(scenario: Scenario, shadowing: ShadowingField | None = None,
                 report: SinrReport | None = None) -> DropAnalysis:
    cfg = scenario.config
    report = report or analyze(scenario, shadowing)
    if cfg.rate_engine == "least_norm":
        ln = report_rates_least_norm(report)
        victims = [report.mue_ids[i] for i in np.flatnonzero(report.victim_mask)]
        reqs = tuple(MutedRateRequirement(m, float(a), bool(ok))
                     for m, a, ok in zip(victims, ln.alpha, ln.feasible))
    else:
        reqs = tuple(required_rates(report))
    victim_sets = collect_victim_sets(report.victims, report.aggressors, report.henb_ids)
    coalitions = tuple(group_coalitions(victim_sets))
    frame = FrameConfig.from_config(cfg)
    offsets = coalition_offsets(coalitions, frame, cfg.stagger_coalitions)
    return DropAnalysis(report, reqs, victim_sets, coalitions, frame, offsets)


def plan_for(scheme: Scheme, drop: DropAnalysis) -> MutingPlan:
    ids = drop.report.henb_ids
    if scheme.kind == "none":
        return MutingPlan.empty(ids, drop.frame)
    if scheme.kind == "proposed":
        rates = aggregate_per_henb(drop.requirements, drop.victim_sets)
    elif scheme.scope == "all":
        rates = {f: scheme.alpha for f in ids}
    else:
        rates = {f: scheme.alpha for f, v in drop.victim_sets.items() if v}
    plan = plan_from_rates(ids, rates, drop.frame)
    return align_coalition_patterns(drop.coalitions, plan, drop.frame, drop.offsets)


def protected_fraction(plan: MutingPlan, aggressor_mask: np.ndarray) -> np.ndarray:
    """Per MUE, fraction of subframes in which all of its aggressors are blank.

    MUEs without aggressors get 0.
    """
    if plan.bitmaps.size == 0:
        return np.zeros(aggressor_mask.shape[0])
    # a subframe is unprotected for m if any aggressor transmits in it
    transmitting = (~plan.bitmaps).astype(float)
    exposed = (aggressor_mask.astype(float) @ transmitting) > 0
    beta = (~exposed).sum(axis=1) / exposed.shape[1]
    return np.where(aggressor_mask.any(axis=1), beta, 0.0)


def score_throughput(report: SinrReport, plan: MutingPlan, frame: FrameConfig,
                     bandwidth: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-MUE and per-FUE throughput in kbps.

    MUEs share the band equally and are served in every subframe; in
    subframe s only HeNBs not blanked in s interfere. An FUE is served at
    its unmuted SINR in the subframes its HeNB does not blank.
    """
    n_mue = len(report.mue_ids)
    share = bandwidth / n_mue
    if plan.bitmaps.size:
        active = (~plan.bitmaps).astype(float)                    # (HeNB x subframe)
        eta = report.interference @ active + report.noise          # (MUE x subframe)
    else:
        eta = np.full((n_mue, frame.n_subframes), report.noise)
    mue = share * np.log2(1.0 + report.signal[:, None] / eta).mean(axis=1) / 1e3
    fue = bandwidth * np.log2(1.0 + report.fue_gamma) * (1.0 - plan.blank_fraction) / 1e3
    return mue, fue


def score_outage(post_gamma: np.ndarray, gamma0: float, exclude: np.ndarray | None = None) -> float:
    """Fraction of MUEs below ``gamma0`` (excluded MUEs never count as outages)."""
    post_gamma = np.asarray(post_gamma, dtype=float)
    if post_gamma.size == 0:
        return 0.0
    below = linear_to_db(post_gamma) < linear_to_db(gamma0) - SINR_TOL_DB
    if exclude is not None:
        below &= ~np.asarray(exclude, dtype=bool)
    return float(below.mean())


METRICS = (
    "muted_rate",        # mean over MUEs of the blanked fraction protecting each victim
    "required_rate",     # mean over MUEs of the closed-form requirement
    "sinr_pre_db",
    "sinr_post_db",
    "mue_throughput",    # kbps
    "fue_throughput",    # kbps
    "outage",            # proposed: infeasible victims excluded; others: all MUEs
    "outage_all",
    "outage_feasible",
    "infeasible",        # fraction of MUEs that are noise-limited victims
)
_M = {name: i for i, name in enumerate(METRICS)}


def score_scheme(drop: DropAnalysis, scheme: Scheme, bandwidth: float,
                 plan: MutingPlan | None = None) -> np.ndarray:
    """Metric vector (ordered as :data:`METRICS`) of one scheme on one drop."""
    report = drop.report
    plan = plan if plan is not None else plan_for(scheme, drop)
    out = np.empty(len(METRICS))
    q = plan.blank_fraction
    agg = report.aggressor_mask
    if agg.shape[1]:
        granted = np.where(agg, q[None, :], np.inf).min(axis=1)
        granted = np.where(agg.any(axis=1), granted, 0.0)
    else:
        granted = np.zeros(len(report.mue_ids))
    post = muted_sinr(report, q)
    infeasible = drop.infeasible
    mue_tp, fue_tp = score_throughput(report, plan, drop.frame, bandwidth)
    out[_M["muted_rate"]] = granted.mean()
    out[_M["required_rate"]] = drop.required_alpha.mean()
    out[_M["sinr_pre_db"]] = report.gamma_db.mean()
    out[_M["sinr_post_db"]] = linear_to_db(post).mean()
    out[_M["mue_throughput"]] = mue_tp.mean()
    out[_M["fue_throughput"]] = fue_tp.mean() if fue_tp.size else np.nan
    out[_M["outage_all"]] = score_outage(post, report.gamma0)
    out[_M["outage_feasible"]] = score_outage(post, report.gamma0, infeasible)
    out[_M["outage"]] = out[_M["outage_feasible"] if scheme.kind == "proposed" else _M["outage_all"]]
    out[_M["infeasible"]] = infeasible.mean()
    return out


# -- Monte-Carlo loop ---------------------------------------------------------

@dataclass(frozen=True)
class RunFailure:
    run: int
    step: int
    scheme: str
    message: str

    def __str__(self) -> str:
        return f"run {self.run} step {self.step} scheme {self.scheme}: {self.message}"


def run_single(config: ScenarioConfig, schemes: Sequence[Scheme], run_index: int,
               on_step: Callable | None = None) -> tuple[np.ndarray, RunFailure | None]:
    """All steps of one run; returns (steps+1, schemes, metrics) values and any failure.

    ``on_step(scenario, drop)`` is called after each step is analysed.
    """
    values = np.full((config.num_steps + 1, len(schemes), len(METRICS)), np.nan)
    step, label = 0, "-"
    try:
        shadowing = ShadowingField.draw(config, run_index)
        scenario = generate_scenario(config, run_index)
        for step in range(config.num_steps + 1):
            if step:
                scenario = advance_step(scenario, shadowing)
            label = "-"
            drop = analyze_drop(scenario, shadowing)
            if on_step is not None:
                on_step(scenario, drop)
            for k, scheme in enumerate(schemes):
                label = scheme.label
                values[step, k] = score_scheme(drop, scheme, config.bandwidth)
    except Exception as exc:  # reported, never fatal for other runs
        log.warning("run %d step %d scheme %s failed: %s", run_index, step, label, exc)
        return np.full_like(values, np.nan), RunFailure(run_index, step, label, f"{type(exc).__name__}: {exc}")
    return values, None


def _run_chunk(args):
    config, schemes, runs = args
    return [(r, *run_single(config, schemes, r)) for r in runs]


@dataclass
class MetricsReport:
    config: ScenarioConfig
    schemes: tuple[Scheme, ...]
    values: np.ndarray                       # (runs, steps+1, schemes, metrics)
    failures: list[RunFailure] = field(default_factory=list)

    @property
    def steps(self) -> np.ndarray:
        return np.arange(self.values.shape[1])

    @property
    def completed(self) -> int:
        return self.values.shape[0] - len(self.failures)

    def _metric(self, metric: str) -> np.ndarray:
        return self.values[..., _M[metric]]

    def n(self, metric: str) -> np.ndarray:
        """(schemes x steps) count of runs with a defined value."""
        return np.isfinite(self._metric(metric)).sum(axis=0).T

    def mean(self, metric: str) -> np.ndarray:
        """(schemes x steps) mean over runs."""
        v = self._metric(metric)
        n = np.isfinite(v).sum(axis=0)
        total = np.where(np.isfinite(v), v, 0.0).sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(n > 0, total / np.maximum(n, 1), np.nan).T

    def std(self, metric: str) -> np.ndarray:
        v = self._metric(metric)
        finite = np.isfinite(v)
        n = finite.sum(axis=0)
        mu = np.where(finite, v, 0.0).sum(axis=0) / np.maximum(n, 1)
        dev = np.where(finite, v - mu, 0.0)
        var = (dev ** 2).sum(axis=0) / np.maximum(n - 1, 1)
        return np.where(n > 0, np.sqrt(var), np.nan).T

    def trace(self, metric: str, scheme: str | Scheme) -> np.ndarray:
        label = scheme.label if isinstance(scheme, Scheme) else scheme
        k = [s.label for s in self.schemes].index(label)
        return self.mean(metric)[k]

    def per_run(self, metric: str, scheme: str | Scheme) -> np.ndarray:
        """(runs x steps) raw values of one scheme."""
        label = scheme.label if isinstance(scheme, Scheme) else scheme
        k = [s.label for s in self.schemes].index(label)
        return self._metric(metric)[:, :, k]

    def csv_text(self, metric: str) -> str:
        mean, std, n = self.mean(metric), self.std(metric), self.n(metric)
        rows = ["scheme,step,mean,stddev,n"]
        for k, s in enumerate(self.schemes):
            for t in range(mean.shape[1]):
                rows.append(f"{s.label},{t},{_fmt(mean[k, t])},{_fmt(std[k, t])},{int(n[k, t])}")
        return "\n".join(rows) + "\n"

    def summary(self) -> dict:
        return {
            "version": __version__,
            "seed": self.config.rng_seed,
            "runs_requested": int(self.values.shape[0]),
            "runs_completed": int(self.completed),
            "failures": [str(f) for f in self.failures],
            "schemes": [s.label for s in self.schemes],
            "config": self.config.to_dict(),
            "metrics": {m: {s.label: [None if not math.isfinite(x) else float(x) for x in row]
                            for s, row in zip(self.schemes, self.mean(m))}
                        for m in METRICS},
        }

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, metric in CSV_FILES.items():
            p = out / name
            p.write_text(self.csv_text(metric))
            paths.append(p)
        p = out / "summary.json"
        p.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        paths.append(p)
        return paths


CSV_FILES = {
    "muted_rate.csv": "muted_rate",
    "sinr.csv": "sinr_post_db",
    "mue_throughput.csv": "mue_throughput",
    "fue_throughput.csv": "fue_throughput",
    "outage.csv": "outage",
}


def _fmt(x: float) -> str:
    return "nan" if not math.isfinite(x) else f"{x:.12g}"


def run_experiment(config: ScenarioConfig, schemes: Sequence[Scheme] = DEFAULT_SCHEMES,
                   workers: int = 1, progress: Callable[[int, int], None] | None = None,
                   runs: Sequence[int] | None = None) -> MetricsReport:
    """Run ``config.num_runs`` Monte-Carlo runs (or the given ``runs``) under ``schemes``.

    Results are assembled by run index, so they do not depend on ``workers``.
    """
    schemes = tuple(schemes)
    if not schemes:
        raise ValueError("at least one scheme is required")
    config.validate()
    runs = list(range(config.num_runs)) if runs is None else list(runs)
    values = np.full((len(runs), config.num_steps + 1, len(schemes), len(METRICS)), np.nan)
    slot = {r: i for i, r in enumerate(runs)}
    failures: list[RunFailure] = []
    done = 0

    def collect(results):
        nonlocal done
        for r, v, failure in results:
            values[slot[r]] = v
            if failure is not None:
                failures.append(failure)
            done += 1
            if progress is not None:
                progress(done, len(runs))

    if workers <= 1 or len(runs) < 2:
        for r in runs:
            collect([(r, *run_single(config, schemes, r))])
    else:
        size = max(1, math.ceil(len(runs) / (workers * 4)))
        chunks = [runs[i:i + size] for i in range(0, len(runs), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for results in pool.map(_run_chunk, [(config, schemes, c) for c in chunks]):
                collect(results)
    failures.sort(key=lambda f: f.run)
    return MetricsReport(config, schemes, values, failures)


def default_workers() -> int:
    return os.cpu_count() or 1
