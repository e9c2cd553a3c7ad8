"""Victim collection and grouping of mutually interfering HeNBs.

Two HeNBs belong to the same coalition when a chain of shared victims links
them, i.e. coalitions are the connected components of the graph whose
edges join HeNBs with intersecting victim sets. Members of a coalition
blank the same subframes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .absf import FrameConfig, MutingPlan, quantize_pattern
from .deployment import id_key


class DisjointSet:
    """Union-find with path halving and union by size."""

    def __init__(self, items: Iterable = ()):
        self.parent = {}
        self.size = {}
        for x in items:
            self.add(x)

    def add(self, x) -> None:
        if x not in self.parent:
            self.parent[x] = x
            self.size[x] = 1

    def find(self, x):
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra

    def groups(self) -> list[list]:
        out: dict = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return list(out.values())


VictimSets = Mapping[str, frozenset]


def collect_victim_sets(victims: Sequence[str], aggressor_sets: Mapping[str, Iterable[str]],
                        henb_ids: Sequence[str] | None = None) -> dict[str, frozenset]:
    """For every HeNB, the victims that list it as an aggressor.

    ``henb_ids`` fixes the key set (HeNBs that aggress nobody map to the
    empty set); by default only HeNBs named in ``aggressor_sets`` appear.
    """
    if henb_ids is None:
        henb_ids = sorted({f for v in victims for f in aggressor_sets.get(v, ())}, key=id_key)
    lists = {v: frozenset(aggressor_sets.get(v, ())) for v in victims}
    out = {}
    for f in henb_ids:
        out[f] = frozenset(v for v in victims if f in lists[v])
    return out


def invert_victim_sets(victim_sets: Mapping[str, Iterable[str]]) -> dict[str, frozenset]:
    """Aggressor set per victim recovered from per-HeNB victim sets."""
    out: dict[str, set] = {}
    for f, victims in victim_sets.items():
        for v in victims:
            out.setdefault(v, set()).add(f)
    return {v: frozenset(fs) for v, fs in out.items()}


@dataclass(frozen=True)
class Coalition:
    id: int
    members: frozenset
    covered_victims: frozenset


def _label(groups, victim_sets) -> list[Coalition]:
    # deterministic ids: order groups by their smallest member id
    ordered = sorted((sorted(g, key=id_key) for g in groups), key=lambda g: id_key(g[0]))
    return [Coalition(i, frozenset(g), frozenset().union(*(victim_sets[f] for f in g)))
            for i, g in enumerate(ordered)]


def group_coalitions(victim_sets: Mapping[str, Iterable[str]]) -> list[Coalition]:
    """Partition aggressor HeNBs into coalitions linked by shared victims."""
    sets = {f: frozenset(v) for f, v in victim_sets.items() if v}
    dsu = DisjointSet(sets)
    first_seen: dict = {}
    for f in sorted(sets, key=id_key):
        for v in sets[f]:
            if v in first_seen:
                dsu.union(first_seen[v], f)
            else:
                first_seen[v] = f
    return _label(dsu.groups(), sets)


def group_coalitions_single_pass(victim_sets: Mapping[str, Iterable[str]]) -> list[Coalition]:
    """One outer sweep as in the original grouping pseudocode.

    A HeNB skipped early in a sweep is not revisited when the coalition's
    victim set later grows, so transitive links can be missed; kept for
    comparison with :func:`group_coalitions`.
    """
    sets = {f: frozenset(v) for f, v in victim_sets.items() if v}
    order = sorted(sets, key=id_key)
    grouped = set()
    groups = []
    for f in order:
        if f in grouped:
            continue
        covered, members = set(sets[f]), [f]
        grouped.add(f)
        for g in order:
            if g not in grouped and covered & sets[g]:
                covered |= sets[g]
                members.append(g)
                grouped.add(g)
        groups.append(members)
    return _label(groups, sets)


def coalition_index(coalitions: Sequence[Coalition], henb_ids: Sequence[str]) -> np.ndarray:
    where = {f: c.id for c in coalitions for f in c.members}
    return np.array([where.get(f, -1) for f in henb_ids], dtype=int)


def coalition_offsets(coalitions: Sequence[Coalition], frame: FrameConfig,
                      stagger: bool = False) -> dict[int, int]:
    """Shared start subframe per coalition: 0 for all, or round-robin if staggered."""
    return {c.id: (c.id % frame.n_subframes if stagger else 0) for c in coalitions}


def align_coalition_patterns(coalitions: Sequence[Coalition], plan: MutingPlan,
                             frame: FrameConfig | None = None,
                             offsets: Mapping[int, int] | None = None) -> MutingPlan:
    """Give every coalition member the bitmap of the coalition's largest rate."""
    frame = frame or FrameConfig(n_subframes=plan.bitmaps.shape[1])
    offsets = offsets or {}
    alpha = np.array(plan.alpha, dtype=float)
    bitmaps = np.array(plan.bitmaps, dtype=bool)
    index = {f: i for i, f in enumerate(plan.henb_ids)}
    for c in coalitions:
        rows = [index[f] for f in c.members if f in index]
        if not rows:
            continue
        rate = float(alpha[rows].max())
        pattern = quantize_pattern(rate, frame, offsets.get(c.id, 0))
        alpha[rows] = rate
        bitmaps[rows] = pattern
    return MutingPlan(plan.henb_ids, alpha, bitmaps, coalition_index(coalitions, plan.henb_ids),
                      np.asarray(plan.requested, dtype=float).copy())


def format_coalitions(coalitions: Sequence[Coalition], step: int | None = None) -> str:
    """One JSON object per coalition: id, members, covered victims."""
    lines = []
    for c in coalitions:
        rec = {"coalition": c.id, "members": sorted(c.members, key=id_key),
               "victims": sorted(c.covered_victims, key=id_key)}
        if step is not None:
            rec = {"step": step, **rec}
        lines.append(json.dumps(rec))
    return "".join(line + "\n" for line in lines)
