"""Path loss, log-normal shadowing and link budgets.

All functions accept scalars or numpy arrays. Losses are in dB, powers in
dBm, linear gains are plain power ratios.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig

MACRO_LINK = "macro_link"
FEMTO_LINK = "femto_link"

# spawn-key tag for the per-run shadowing stream
SHADOW_STREAM = 1


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_mw(dbm):
    return db_to_linear(dbm)


def _positive(d, name):
    d = np.asarray(d, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError(f"{name} must be > 0 m, got {d.min() if d.size else d!r}")
    return d


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def macro_pathloss(D, rx_indoor=False, L_ow: float = 20.0):
    """MeNB -> UE loss: 15.3 + 37.6 log10(D), plus ``L_ow`` for indoor receivers."""
    D = _positive(D, "D")
    loss = 15.3 + 37.6 * np.log10(D) + np.where(rx_indoor, L_ow, 0.0)
    return _out(loss)


def femto_pathloss(d):
    """HeNB -> UE loss, indoor or outdoor: 127 + 30 log10(d / 1000)."""
    d = _positive(d, "d")
    return _out(127.0 + 30.0 * np.log10(d / 1000.0))


def indoor_serving_pathloss(d):
    """Same-apartment alternative for the HeNB -> own FUE link.

    38.46 + 20 log10(d) + 0.7 d (dual-stripe indoor model, no internal walls).
    Only used when ``serving_link_model = "indoor"``.
    """
    d = _positive(d, "d")
    return _out(38.46 + 20.0 * np.log10(d) + 0.7 * d)


def shadow_std(link_kind: str, config: ScenarioConfig) -> float:
    if link_kind == MACRO_LINK:
        return config.shadow_std_macro
    if link_kind == FEMTO_LINK:
        return config.shadow_std_femto
    raise ValueError(f"unknown link kind {link_kind!r}")


def sample_shadowing(link_kind: str, rng: np.random.Generator,
                     config: ScenarioConfig | None = None, size=None):
    """Zero-mean normal shadowing in dB (sigma 10 dB macro, 8 dB femto by default)."""
    std = shadow_std(link_kind, config or ScenarioConfig())
    if std == 0:
        return 0.0 if size is None else np.zeros(size)
    return rng.normal(0.0, std, size)


def link_rng(config: ScenarioConfig, run_index: int, *link_key: int) -> np.random.Generator:
    """Generator for one run's shadowing (optionally narrowed to one link key)."""
    seq = np.random.SeedSequence(config.rng_seed, spawn_key=(run_index, SHADOW_STREAM, *link_key))
    return np.random.default_rng(seq)


@dataclass(frozen=True)
class ShadowingField:
    """Frozen shadowing for one run, in dB.

    ``macro[j]`` is the MeNB -> receiver j term and ``femto[f, j]`` the
    HeNB f -> receiver j term, with receivers ordered MUEs then FUEs.
    """

    macro: np.ndarray
    femto: np.ndarray

    @classmethod
    def draw(cls, config: ScenarioConfig, run_index: int) -> "ShadowingField":
        n_rx = config.num_mues + config.num_henbs
        rng = link_rng(config, run_index)
        macro = np.asarray(sample_shadowing(MACRO_LINK, rng, config, n_rx), dtype=float)
        femto = np.asarray(sample_shadowing(FEMTO_LINK, rng, config, (config.num_henbs, n_rx)),
                           dtype=float)
        return cls(macro, femto)

    @classmethod
    def zeros(cls, num_mues: int, num_henbs: int) -> "ShadowingField":
        n_rx = num_mues + num_henbs
        return cls(np.zeros(n_rx), np.zeros((num_henbs, n_rx)))


@dataclass(frozen=True)
class LinkLoss:
    pathloss: float
    shadowing: float
    tx_antenna_gain: float
    rx_antenna_gain: float

    @property
    def total_gain_db(self) -> float:
        return -self.pathloss - self.shadowing + self.tx_antenna_gain + self.rx_antenna_gain

    @property
    def total_gain_linear(self) -> float:
        return float(db_to_linear(self.total_gain_db))


def _distance(tx, rx, floor):
    dx = rx.position[0] - tx.position[0]
    dy = rx.position[1] - tx.position[1]
    return max(float(np.hypot(dx, dy)), floor)


def path_gain(tx, rx, config: ScenarioConfig, rng: np.random.Generator | None = None,
              shadowing: float | None = None) -> LinkLoss:
    """Link budget for one transmitter/receiver pair.

    ``tx`` must be a MeNB or HeNB node and ``rx`` a MUE or FUE. Shadowing is
    taken from ``shadowing`` if given, otherwise drawn from ``rng``, otherwise 0.
    """
    tx_kind, rx_kind = str(tx.kind), str(rx.kind)
    if tx_kind not in ("MeNB", "HeNB") or rx_kind not in ("MUE", "FUE"):
        raise TypeError(f"unsupported link {tx_kind} -> {rx_kind}")
    d = _distance(tx, rx, config.min_distance)
    if tx_kind == "MeNB":
        pl = macro_pathloss(d, rx.indoor, config.outdoor_wall_loss)
        link_kind, g_tx = MACRO_LINK, config.menb_antenna_gain
    else:
        if rx_kind == "FUE" and rx.serving == tx.id and config.serving_link_model == "indoor":
            pl = indoor_serving_pathloss(d)
        else:
            pl = femto_pathloss(d)
        link_kind, g_tx = FEMTO_LINK, config.henb_antenna_gain
    if shadowing is None:
        shadowing = float(sample_shadowing(link_kind, rng, config)) if rng is not None else 0.0
    return LinkLoss(pl, shadowing, g_tx, config.mue_antenna_gain)


def pathloss_table(distances, L_ow: float = 20.0):
    """Rows of (distance, macro outdoor, macro indoor, femto) losses in dB."""
    d = _positive(np.atleast_1d(distances), "distance")
    return np.column_stack([
        d,
        macro_pathloss(d, False, L_ow),
        macro_pathloss(d, True, L_ow),
        femto_pathloss(d),
    ])
