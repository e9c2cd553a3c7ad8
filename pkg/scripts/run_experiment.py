"""Full Monte-Carlo evaluation with the default parameter table.

Writes the per-metric CSVs and prints mean traces at a few steps.

    python3 scripts/run_experiment.py --out results/default
    python3 scripts/run_experiment.py --out results/dense --mues 100 --henbs 400 --runs 500
"""

import argparse
import time

from absfsim.config import ScenarioConfig
from absfsim.harness import DEFAULT_SCHEMES, default_workers, parse_schemes, run_experiment

SHOWN = ("muted_rate", "sinr_post_db", "mue_throughput", "fue_throughput", "outage")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", required=True)
    p.add_argument("--runs", type=int, default=2000)
    p.add_argument("--steps", type=int, default=30)
    p.add_argument("--mues", type=int, default=10)
    p.add_argument("--henbs", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--schemes", default=None)
    p.add_argument("--workers", type=int, default=default_workers())
    args = p.parse_args()

    cfg = ScenarioConfig(num_runs=args.runs, num_steps=args.steps, num_mues=args.mues,
                         num_henbs=args.henbs, rng_seed=args.seed)
    schemes = parse_schemes(args.schemes) if args.schemes else DEFAULT_SCHEMES
    t0 = time.perf_counter()
    rep = run_experiment(cfg, schemes, workers=args.workers)
    rep.write(args.out)
    print(f"{cfg.num_runs} runs x {cfg.num_steps + 1} steps in {time.perf_counter() - t0:.1f}s; "
          f"{len(rep.failures)} failures")

    steps = sorted({0, 1, 2, 5, 10, 20, cfg.num_steps} & set(range(cfg.num_steps + 1)))
    for m in SHOWN:
        print(f"\n{m}")
        print(f"  {'scheme':<12}" + "".join(f"{'step ' + str(t):>12}" for t in steps))
        for s, row in zip(rep.schemes, rep.mean(m)):
            print(f"  {s.label:<12}" + "".join(f"{row[t]:>12.4g}" for t in steps))


if __name__ == "__main__":
    main()
