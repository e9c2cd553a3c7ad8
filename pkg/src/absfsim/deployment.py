"""Macro/femto drop geometry and the step-wise MUE displacement.

One MeNB sits at the origin. MUEs and HeNBs are uniform over the macro
disc; every HeNB owns a square apartment footprint centred on it, holds
exactly one FUE somewhere inside that footprint, and marks any MUE that
lands inside the footprint as indoor.

Randomness is derived from ``numpy.random.SeedSequence(rng_seed,
spawn_key=(run, stream, ...))`` so a drop or a step can be regenerated in
isolation, in any order, on any worker.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, TextIO

import numpy as np

from .config import ScenarioConfig
from . import propagation

PLACEMENT_STREAM = 0
MOBILITY_STREAM = 2


class Kind(str, enum.Enum):
    MENB = "MeNB"
    HENB = "HeNB"
    MUE = "MUE"
    FUE = "FUE"

    def __str__(self) -> str:
        return self.value


def id_key(node_id: str):
    """Natural sort key: "HeNB-10" sorts after "HeNB-9"."""
    return tuple(int(p) if p.isdigit() else p for p in re.split(r"(\d+)", str(node_id)))


@dataclass(frozen=True)
class Node:
    id: str
    kind: Kind
    position: tuple[float, float]
    indoor: bool = False
    serving: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))


@dataclass(frozen=True)
class Scenario:
    config: ScenarioConfig
    nodes: tuple[Node, ...]
    step_index: int = 0
    run_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("node ids must be unique")
        by_id = {n.id: n for n in self.nodes}
        kinds = [n.kind for n in self.nodes]
        if kinds.count(Kind.MENB) != 1:
            raise ValueError("scenario needs exactly one MeNB")
        menb = next(n for n in self.nodes if n.kind is Kind.MENB)
        served = {}
        for n in self.nodes:
            if n.kind is Kind.MUE and n.serving != menb.id:
                raise ValueError(f"{n.id} must be served by {menb.id}")
            if n.kind is Kind.FUE:
                host = by_id.get(n.serving)
                if host is None or host.kind is not Kind.HENB:
                    raise ValueError(f"{n.id} must be served by a HeNB")
                served[n.serving] = served.get(n.serving, 0) + 1
        for n in self.nodes:
            if n.kind is Kind.HENB and served.get(n.id, 0) != 1:
                raise ValueError(f"{n.id} must serve exactly one FUE")

    def _sorted(self, kind: Kind) -> tuple[Node, ...]:
        return tuple(sorted((n for n in self.nodes if n.kind is kind), key=lambda n: id_key(n.id)))

    @cached_property
    def menb(self) -> Node:
        return self._sorted(Kind.MENB)[0]

    @cached_property
    def mues(self) -> tuple[Node, ...]:
        return self._sorted(Kind.MUE)

    @cached_property
    def henbs(self) -> tuple[Node, ...]:
        return self._sorted(Kind.HENB)

    @cached_property
    def fues(self) -> tuple[Node, ...]:
        """FUEs ordered so that ``fues[i]`` is served by ``henbs[i]``."""
        by_host = {n.serving: n for n in self.nodes if n.kind is Kind.FUE}
        return tuple(by_host[h.id] for h in self.henbs)

    def positions(self, nodes: Iterable[Node]) -> np.ndarray:
        return np.array([n.position for n in nodes], dtype=float).reshape(-1, 2)

    @cached_property
    def mue_xy(self) -> np.ndarray:
        return self.positions(self.mues) - np.asarray(self.menb.position)

    @cached_property
    def henb_xy(self) -> np.ndarray:
        return self.positions(self.henbs) - np.asarray(self.menb.position)

    @cached_property
    def fue_xy(self) -> np.ndarray:
        return self.positions(self.fues) - np.asarray(self.menb.position)


def _rng(config: ScenarioConfig, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(config.rng_seed, spawn_key=key))


def uniform_disc(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def indoor_mask(points: np.ndarray, henb_xy: np.ndarray, side: float) -> np.ndarray:
    """True for points inside any HeNB's square footprint."""
    if len(henb_xy) == 0 or len(points) == 0:
        return np.zeros(len(points), dtype=bool)
    delta = np.abs(points[:, None, :] - henb_xy[None, :, :])
    return np.any(np.all(delta <= side / 2.0, axis=2), axis=1)


def _place_fues(rng, henb_xy, side, radius):
    fues = np.empty_like(henb_xy)
    for i, h in enumerate(henb_xy):
        # footprint may poke out of the disc near the edge; resample until inside
        while True:
            p = h + rng.uniform(-side / 2.0, side / 2.0, 2)
            if p @ p <= radius * radius:
                fues[i] = p
                break
    return fues


def _build_nodes(mue_xy, henb_xy, fue_xy, mue_indoor) -> list[Node]:
    nodes = [Node("MeNB", Kind.MENB, (0.0, 0.0))]
    nodes += [Node(f"MUE-{i}", Kind.MUE, (float(x), float(y)), bool(mue_indoor[i]), "MeNB")
              for i, (x, y) in enumerate(mue_xy)]
    nodes += [Node(f"HeNB-{i}", Kind.HENB, (float(x), float(y)), True)
              for i, (x, y) in enumerate(henb_xy)]
    nodes += [Node(f"FUE-{i}", Kind.FUE, (float(x), float(y)), True, f"HeNB-{i}")
              for i, (x, y) in enumerate(fue_xy)]
    return nodes


def generate_scenario(config: ScenarioConfig, run_index: int) -> Scenario:
    """Draw the initial drop for Monte-Carlo run ``run_index``."""
    config.validate()
    if not 0 <= run_index < config.num_runs:
        raise IndexError(f"run_index {run_index} outside [0, {config.num_runs})")
    rng = _rng(config, run_index, PLACEMENT_STREAM)
    R = config.macro_radius
    mue_xy = uniform_disc(rng, config.num_mues, R)
    henb_xy = uniform_disc(rng, config.num_henbs, R)
    fue_xy = _place_fues(rng, henb_xy, config.apartment_size, R)
    indoor = indoor_mask(mue_xy, henb_xy, config.apartment_size)
    nodes = _build_nodes(mue_xy, henb_xy, fue_xy, indoor)
    return Scenario(config, tuple(nodes), step_index=0, run_index=run_index)


def strongest_interferer(scenario: Scenario,
                         shadowing: propagation.ShadowingField | None = None) -> np.ndarray:
    """Index of the HeNB with the largest path gain towards each MUE (-1 if none).

    HeNB antenna gains are identical, so the largest gain is the smallest
    path loss plus shadowing.
    """
    cfg = scenario.config
    n_mue, n_henb = len(scenario.mues), len(scenario.henbs)
    if n_henb == 0:
        return np.full(n_mue, -1)
    if shadowing is None:
        shadowing = propagation.ShadowingField.draw(cfg, scenario.run_index)
    d = np.linalg.norm(scenario.mue_xy[:, None, :] - scenario.henb_xy[None, :, :], axis=2)
    loss = propagation.femto_pathloss(np.maximum(d, cfg.min_distance)) + shadowing.femto[:, :n_mue].T
    return np.argmin(loss, axis=1)


def ray_exit(p: np.ndarray, u: np.ndarray, radius: float) -> float:
    """Largest t >= 0 with |p + t u| <= radius, for p inside the disc and unit u."""
    pu = float(p @ u)
    disc = pu * pu - (float(p @ p) - radius * radius)
    return max(0.0, -pu + np.sqrt(max(disc, 0.0)))


def advance_step(scenario: Scenario,
                 shadowing: propagation.ShadowingField | None = None) -> Scenario:
    """Move every MUE directly away from its strongest interfering HeNB.

    The displacement length is Uniform(0, 2 * step_distance), so its mean is
    ``step_distance``; a move that would leave the macro disc stops on the
    boundary. Distance to the fled HeNB therefore never decreases.
    """
    cfg = scenario.config
    if scenario.step_index >= cfg.num_steps:
        raise IndexError(f"step budget exhausted ({scenario.step_index} >= {cfg.num_steps})")
    rng = _rng(cfg, scenario.run_index, MOBILITY_STREAM, scenario.step_index)
    n_mue = len(scenario.mues)
    lengths = rng.uniform(0.0, 2.0 * cfg.step_distance, n_mue)
    spare_angles = rng.uniform(0.0, 2.0 * np.pi, n_mue)
    target = strongest_interferer(scenario, shadowing)
    if len(scenario.henbs) == 0:
        return replace(scenario, step_index=scenario.step_index + 1)

    mue_xy = scenario.mue_xy.copy()
    henb_xy = scenario.henb_xy
    for i in range(n_mue):
        away = mue_xy[i] - henb_xy[target[i]]
        norm = np.hypot(*away)
        if norm > 0:
            u = away / norm
        else:
            u = np.array([np.cos(spare_angles[i]), np.sin(spare_angles[i])])
        t = min(lengths[i], ray_exit(mue_xy[i], u, cfg.macro_radius))
        mue_xy[i] = mue_xy[i] + t * u
    indoor = indoor_mask(mue_xy, henb_xy, cfg.apartment_size)
    origin = np.asarray(scenario.menb.position)
    moved = {m.id: replace(m, position=tuple(map(float, xy + origin)), indoor=bool(ind))
             for m, xy, ind in zip(scenario.mues, mue_xy, indoor)}
    nodes = tuple(moved.get(n.id, n) for n in scenario.nodes)
    return replace(scenario, nodes=nodes, step_index=scenario.step_index + 1)


# -- line-oriented export -------------------------------------------------

SCENARIO_HEADER = "# id kind x y indoor serving"


def write_scenario(scenario: Scenario, stream: TextIO) -> None:
    """One node per line: ``id kind x y indoor serving`` (``-`` for no server)."""
    stream.write(f"# run {scenario.run_index} step {scenario.step_index}\n")
    stream.write(SCENARIO_HEADER + "\n")
    for n in scenario.nodes:
        stream.write(f"{n.id} {n.kind} {n.position[0]!r} {n.position[1]!r} "
                     f"{int(n.indoor)} {n.serving or '-'}\n")


def read_scenario(lines: Iterable[str], config: ScenarioConfig) -> Scenario:
    """Parse the :func:`write_scenario` format; ``config`` counts are overridden."""
    nodes = []
    run = step = 0
    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = re.match(r"#\s*run\s+(\d+)\s+step\s+(\d+)", line)
            if m:
                run, step = int(m.group(1)), int(m.group(2))
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ValueError(f"bad scenario line: {line!r}")
        nid, kind, x, y, indoor, serving = parts
        nodes.append(Node(nid, Kind(kind), (float(x), float(y)), indoor not in ("0", "false", "False"),
                          None if serving == "-" else serving))
    n_mue = sum(n.kind is Kind.MUE for n in nodes)
    n_henb = sum(n.kind is Kind.HENB for n in nodes)
    cfg = config.replace(num_mues=n_mue, num_henbs=n_henb,
                         num_runs=max(config.num_runs, run + 1),
                         num_steps=max(config.num_steps, step))
    return Scenario(cfg, tuple(nodes), step_index=step, run_index=run)
