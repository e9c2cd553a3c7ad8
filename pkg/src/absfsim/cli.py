"""Command-line entry point: ``absf-sim {run,inspect,trace,pathloss,validate}``.

Exit codes: 0 success, 1 runtime failure, 2 usage/configuration error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .absf import aggregate_per_henb, blanked_count, muted_sinr
from .coalition import format_coalitions
from .config import ConfigError, ScenarioConfig, format_config, load_config, make_config
from .deployment import advance_step, generate_scenario, id_key, read_scenario, write_scenario
from .harness import (CSV_FILES, DEFAULT_SCHEMES, PROPOSED, analyze_drop, default_workers,
                      parse_schemes, plan_for, run_experiment)
from .propagation import ShadowingField, linear_to_db, pathloss_table

log = logging.getLogger("absfsim")

SEED_ENV = "ABSF_SIM_SEED"


class UsageError(Exception):
    """Bad arguments or inputs; reported with exit status 2."""


# -- config assembly ---------------------------------------------------------

def _overrides(args) -> dict:
    out = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        out[key.strip().rsplit(".", 1)[-1]] = raw.strip()
    for flag, name in (("runs", "num_runs"), ("steps", "num_steps"), ("mues", "num_mues"),
                       ("henbs", "num_henbs")):
        value = getattr(args, flag, None)
        if value is not None:
            out[name] = value
    seed = getattr(args, "seed", None)
    if seed is None and os.environ.get(SEED_ENV, "").strip():
        seed = os.environ[SEED_ENV].strip()
    if seed is not None:
        out["rng_seed"] = seed
    return out


def build_config(args) -> ScenarioConfig:
    overrides = _overrides(args)
    if getattr(args, "config", None):
        return load_config(args.config, **overrides)
    return make_config(**overrides)


# -- run -----------------------------------------------------------------------

def _populated(out: Path) -> bool:
    return out.exists() and (not out.is_dir() or any(out.iterdir()))


def cmd_run(args) -> int:
    config = build_config(args)
    try:
        schemes = parse_schemes(args.schemes) if args.schemes else DEFAULT_SCHEMES
    except ValueError as exc:
        raise UsageError(f"--schemes: {exc}") from None
    out = Path(args.out)
    if _populated(out) and not args.overwrite:
        raise UsageError(f"output directory {out} is not empty (use --overwrite)")
    workers = args.workers if args.workers is not None else default_workers()
    if workers < 1:
        raise UsageError("--workers must be >= 1")

    def progress(done, total):
        if not args.quiet:
            print(f"run {done}/{total}", file=sys.stderr)

    report = run_experiment(config, schemes, workers=workers, progress=progress)
    out.mkdir(parents=True, exist_ok=True)
    report.write(out)
    manifest = {
        "config_path": str(args.config) if args.config else None,
        "output_dir": str(out),
        "schemes": [s.label for s in schemes],
        "seed": config.rng_seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "version": __version__,
        "workers": workers,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if report.failures:
        for f in report.failures:
            print(f"error: {f}", file=sys.stderr)
        print(f"error: {len(report.failures)} of {config.num_runs} runs failed; "
              f"{report.completed} reported", file=sys.stderr)
        return 1
    print(f"wrote {len(CSV_FILES)} CSV files, summary.json and manifest.json to {out}")
    return 0


# -- single drop views ---------------------------------------------------------

def _load_drop(args, config: ScenarioConfig):
    """Scenario at (run, step) and its frozen shadowing."""
    if args.scenario:
        path = Path(args.scenario)
        if not path.is_file():
            raise UsageError(f"scenario file not found: {path}")
        with path.open() as fh:
            scenario = read_scenario(fh, config)
        return scenario, ShadowingField.draw(scenario.config, scenario.run_index)
    if not 0 <= args.run < config.num_runs:
        raise UsageError(f"--run {args.run} outside [0, {config.num_runs})")
    step = getattr(args, "step", 0)
    if not 0 <= step <= config.num_steps:
        raise UsageError(f"--step {step} outside [0, {config.num_steps}]")
    shadowing = ShadowingField.draw(config, args.run)
    scenario = generate_scenario(config, args.run)
    for _ in range(step):
        scenario = advance_step(scenario, shadowing)
    return scenario, shadowing


def _fraction(alpha: float, n: int) -> str:
    return f"{blanked_count(alpha, n)}/{n}"


def inspect_data(scenario, shadowing) -> dict:
    """Structured single-drop view: victims, per-HeNB rates, coalitions, SINRs."""
    drop = analyze_drop(scenario, shadowing)
    rep, n = drop.report, drop.frame.n_subframes
    plan = plan_for(PROPOSED, drop)
    post_db = linear_to_db(muted_sinr(rep, plan.blank_fraction))
    reqs = {r.mue_id: r for r in drop.requirements}
    per_henb = aggregate_per_henb(drop.requirements, drop.victim_sets)
    mues = []
    for i, m in enumerate(rep.mue_ids):
        r = reqs.get(m)
        mues.append({
            "id": m,
            "victim": bool(rep.victim_mask[i]),
            "sinr_pre_db": round(float(rep.gamma_db[i]), 6),
            "sinr_post_db": round(float(post_db[i]), 6),
            "alpha": None if r is None else round(r.alpha, 9),
            "quantized": None if r is None else _fraction(r.alpha, n),
            "feasible": None if r is None else r.feasible,
            "aggressors": sorted(rep.aggressors.get(m, ()), key=id_key),
        })
    henbs = []
    for k, f in enumerate(rep.henb_ids):
        victims = sorted(drop.victim_sets.get(f, ()), key=id_key)
        henbs.append({
            "id": f,
            "victims": victims,
            "alpha": round(per_henb.get(f, 0.0), 9),
            "quantized": _fraction(per_henb.get(f, 0.0), n),
            "aligned": _fraction(float(plan.alpha[k]), n),
            "bitmap": "".join("1" if b else "0" for b in plan.bitmaps[k]),
            "coalition": int(plan.coalition[k]),
        })
    coalitions = [{"id": c.id, "members": sorted(c.members, key=id_key),
                   "victims": sorted(c.covered_victims, key=id_key)} for c in drop.coalitions]
    return {"run": scenario.run_index, "step": scenario.step_index,
            "num_mues": len(rep.mue_ids), "num_henbs": len(rep.henb_ids),
            "num_victims": int(rep.victim_mask.sum()), "mues": mues, "henbs": henbs,
            "coalitions": coalitions}


def format_inspect(data: dict) -> str:
    lines = [f"drop run {data['run']} step {data['step']}: {data['num_mues']} MUEs, "
             f"{data['num_henbs']} HeNBs, {data['num_victims']} victims, "
             f"{len(data['coalitions'])} coalitions"]
    lines.append("")
    lines.append("MUE        victim  sinr_pre_dB  sinr_post_dB  alpha_m      n/N    aggressors")
    for m in data["mues"]:
        alpha = "-" if m["alpha"] is None else f"{m['alpha']:.6f}"
        quant = m["quantized"] or "-"
        if m["feasible"] is False:
            quant += "!"
        lines.append(f"{m['id']:<10} {('yes' if m['victim'] else 'no'):<7} {m['sinr_pre_db']:>11.3f}  "
                     f"{m['sinr_post_db']:>12.3f}  {alpha:<11}  {quant:<6} {' '.join(m['aggressors']) or '-'}")
    active = [h for h in data["henbs"] if h["victims"]]
    lines.append("")
    lines.append(f"aggressor HeNBs: {len(active)}")
    if active:
        lines.append("HeNB       alpha_F      n/N    aligned  bitmap      coalition  victims")
        for h in active:
            lines.append(f"{h['id']:<10} {h['alpha']:<11.6f}  {h['quantized']:<6} {h['aligned']:<8} "
                         f"{h['bitmap']:<11} {h['coalition']:<10} {' '.join(h['victims'])}")
    lines.append("")
    lines.append(f"coalitions: {len(data['coalitions'])}")
    for c in data["coalitions"]:
        lines.append(f"  {c['id']}: {{{', '.join(c['members'])}}} victims {{{', '.join(c['victims'])}}}")
    return "\n".join(lines) + "\n"


def cmd_inspect(args) -> int:
    config = build_config(args)
    scenario, shadowing = _load_drop(args, config)
    if args.dump_scenario:
        write_scenario(scenario, sys.stdout)
        return 0
    data = inspect_data(scenario, shadowing)
    if args.json:
        sys.stdout.write(json.dumps(data, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(format_inspect(data))
    return 0


def cmd_trace(args) -> int:
    """Per-step SINR, per-HeNB rate and coalition traces of one run."""
    config = build_config(args)
    if not 0 <= args.run < config.num_runs:
        raise UsageError(f"--run {args.run} outside [0, {config.num_runs})")
    out = Path(args.out)
    if _populated(out) and not args.overwrite:
        raise UsageError(f"output directory {out} is not empty (use --overwrite)")
    sinr_rows = ["step,mue,victim,sinr_pre_db,sinr_post_db,alpha"]
    rate_rows = ["step,henb,alpha,blanked,coalition"]
    coalition_lines = []
    shadowing = ShadowingField.draw(config, args.run)
    scenario = generate_scenario(config, args.run)
    for step in range(config.num_steps + 1):
        if step:
            scenario = advance_step(scenario, shadowing)
        drop = analyze_drop(scenario, shadowing)
        rep = drop.report
        plan = plan_for(PROPOSED, drop)
        post = linear_to_db(muted_sinr(rep, plan.blank_fraction))
        alpha = drop.required_alpha
        for i, m in enumerate(rep.mue_ids):
            sinr_rows.append(f"{step},{m},{int(rep.victim_mask[i])},{rep.gamma_db[i]:.12g},"
                             f"{post[i]:.12g},{alpha[i]:.12g}")
        for k, f in enumerate(rep.henb_ids):
            rate_rows.append(f"{step},{f},{plan.alpha[k]:.12g},{int(plan.bitmaps[k].sum())},"
                             f"{int(plan.coalition[k])}")
        coalition_lines.append(format_coalitions(drop.coalitions, step))
    out.mkdir(parents=True, exist_ok=True)
    (out / "sinr_trace.csv").write_text("\n".join(sinr_rows) + "\n")
    (out / "rate_trace.csv").write_text("\n".join(rate_rows) + "\n")
    (out / "coalitions.jsonl").write_text("".join(coalition_lines))
    print(f"wrote traces for run {args.run} ({config.num_steps + 1} steps) to {out}")
    return 0


def cmd_pathloss(args) -> int:
    if args.max <= 0 or args.points < 1:
        raise UsageError("--max must be > 0 and --points >= 1")
    d = np.linspace(args.max / args.points, args.max, args.points)
    table = pathloss_table(d, args.wall_loss)
    sys.stdout.write("d_m,macro_outdoor_db,macro_indoor_db,femto_db\n")
    for row in table:
        sys.stdout.write(",".join(f"{x:.6f}" for x in row) + "\n")
    return 0


def cmd_validate(args) -> int:
    config = build_config(args)
    sys.stdout.write(format_config(config))
    return 0


# -- parser --------------------------------------------------------------------

def _config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="key = value or JSON config file")
    p.add_argument("--seed", type=int, help=f"RNG seed (fallback: ${SEED_ENV}, then config)")
    p.add_argument("--runs", type=int, help="number of Monte-Carlo runs")
    p.add_argument("--steps", type=int, help="displacement steps per run")
    p.add_argument("--mues", type=int, help="MUEs per drop")
    p.add_argument("--henbs", type=int, help="HeNBs per drop")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config field (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="absf-sim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Monte-Carlo experiment; writes per-metric CSVs")
    _config_flags(p)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--schemes", metavar="LIST",
                   help="comma list: proposed, fixed:A, fixed-agg:A, none "
                        "(default proposed,fixed:0.1,fixed:0.2,fixed:0.3,none)")
    p.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    p.add_argument("--overwrite", action="store_true", help="allow writing into a populated DIR")
    p.add_argument("-q", "--quiet", action="store_true", help="no per-run counter")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("inspect", help="victims, rates and coalitions of one drop")
    _config_flags(p)
    p.add_argument("--run", type=int, default=0)
    p.add_argument("--step", type=int, default=0)
    p.add_argument("--scenario", metavar="FILE", help="read the drop from a scenario text file")
    p.add_argument("--json", action="store_true")
    p.add_argument("--dump-scenario", action="store_true", help="print the drop in text format")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("trace", help="per-step traces of one run")
    _config_flags(p)
    p.add_argument("--run", type=int, default=0)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("pathloss", help="path-loss table as CSV")
    p.add_argument("--max", type=float, default=500.0, help="largest distance (m)")
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--wall-loss", type=float, default=20.0, help="outdoor wall loss L_ow (dB)")
    p.set_defaults(func=cmd_pathloss)

    p = sub.add_parser("validate", help="parse a config and print the effective values")
    _config_flags(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
