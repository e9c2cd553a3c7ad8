"""Search for a shadow-free drop reproducing the five-victim, three-HeNB
worked example (aggressor lists 1 / 1,2,3 / 2,3 / 1,2 / 2,3, quantized
per-victim rates 1/10 and 2/10).

A victim's aggressor set and rate depend only on its own position once the
HeNBs are fixed, so each MUE is searched independently. The result shipped
in data/table31_drop.txt came from this search (positions rounded to 0.1 m).

    python3 scripts/find_worked_example_drop.py
"""

import numpy as np

from absfsim.absf import blanked_count, required_rates
from absfsim.config import ScenarioConfig
from absfsim.deployment import Kind, Node, Scenario, indoor_mask
from absfsim.radio import analyze

WANT = {1: ({1}, 1), 2: ({1, 2, 3}, 2), 3: ({2, 3}, 2), 4: ({1, 2}, 2), 5: ({2, 3}, 2)}
CFG = ScenarioConfig(num_mues=1, num_henbs=3, shadow_std_macro=0.0, shadow_std_femto=0.0, num_runs=1)


def probe(henbs, p):
    """(aggressor numbers, blanked subframes, feasible) for a single MUE at p, or None."""
    nodes = [Node("MeNB", Kind.MENB, (0.0, 0.0)), Node("MUE-1", Kind.MUE, tuple(p), False, "MeNB")]
    nodes += [Node(f"HeNB-{i + 1}", Kind.HENB, tuple(h), True) for i, h in enumerate(henbs)]
    nodes += [Node(f"FUE-{i + 1}", Kind.FUE, (h[0] + 2.0, h[1] + 2.0), True, f"HeNB-{i + 1}")
              for i, h in enumerate(henbs)]
    rep = analyze(Scenario(CFG, tuple(nodes)))
    if not rep.victims:
        return None
    r = required_rates(rep)[0]
    return {int(h.split("-")[1]) for h in rep.aggressors["MUE-1"]}, blanked_count(r.alpha, 10), r.feasible


def main(seed=3, trials=200, samples=3000):
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        h2 = 300.0 + rng.uniform(30, 90)
        henbs = [(300.0, 0.0), (h2, 0.0), (h2 + rng.uniform(-20, 40), rng.uniform(20, 80))]
        henbs = [(round(x, 1), round(y, 1)) for x, y in henbs]
        H = np.array(henbs)
        found = {}
        for _ in range(samples):
            p = tuple(float(x) for x in np.round(H.mean(axis=0) + rng.uniform(-120, 120, 2), 1))
            if indoor_mask(np.array([p]), H, CFG.apartment_size).any():
                continue
            res = probe(henbs, p)
            for m, (agg, n) in WANT.items():
                if m not in found and res and res[0] == agg and res[1] == n and res[2]:
                    found[m] = p
                    break
            if len(found) == len(WANT):
                print("HeNBs:", henbs)
                for m in sorted(found):
                    print(f"MUE-{m}: {found[m]}")
                return
    print("no drop found")


if __name__ == "__main__":
    main()
