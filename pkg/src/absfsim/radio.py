"""Gain matrices, downlink SINR and victim/aggressor detection.

Everything here works in linear units (mW and power ratios); dB appears
only in the ``*_db`` convenience properties.

For MUE ``m`` and HeNB ``f``::

    gamma[m]    = S[m] / eta[m]
    S[m]        = P_M * G(M, m)
    eta[m]      = sum_f P_f * G(f, m) + noise
    F[m, f]     = G(f, m) * gamma0 / G(M, m)
    b[m]        = gamma0 * noise / G(M, m)

so that ``gamma[m] >= gamma0`` is equivalent to ``F[m] @ P_F <= P_M - b[m]``.
"""

from __future__ import annotations

import math

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Mapping

import numpy as np

from .config import ScenarioConfig
from .deployment import Scenario
from .propagation import (ShadowingField, db_to_linear, dbm_to_mw, femto_pathloss,
                          indoor_serving_pathloss, linear_to_db, macro_pathloss)


@dataclass(frozen=True)
class PathGainMatrix:
    """Linear path gains (antenna gains and shadowing included).

    Receivers are split by tier: ``macro_mue[m]`` is G(M, m) and
    ``femto_mue[m, f]`` is G(F_f, m); for FUEs ``macro_fue[j]`` is the MeNB
    interference gain and ``femto_fue[j, f]`` the gain from HeNB f, with
    FUE j served by HeNB j.
    """

    mue_ids: tuple[str, ...]
    henb_ids: tuple[str, ...]
    fue_ids: tuple[str, ...]
    macro_mue: np.ndarray
    femto_mue: np.ndarray
    macro_fue: np.ndarray
    femto_fue: np.ndarray
    noise_mw: float

    @property
    def serving_gain(self) -> np.ndarray:
        """Per receiver (MUEs then FUEs) gain from its serving station."""
        return np.concatenate([self.macro_mue, np.diag(self.femto_fue)])

    @property
    def cross_gain(self) -> np.ndarray:
        """(receiver x HeNB) gains, MUE rows then FUE rows."""
        return np.vstack([self.femto_mue, self.femto_fue])


@dataclass(frozen=True)
class TxPowers:
    menb_mw: float
    henb_mw: np.ndarray

    @classmethod
    def from_config(cls, config: ScenarioConfig, num_henbs: int | None = None) -> "TxPowers":
        n = config.num_henbs if num_henbs is None else num_henbs
        return cls(float(dbm_to_mw(config.menb_power)), np.full(n, float(dbm_to_mw(config.henb_power))))


def _gain(loss_db, shadow_db, g_tx, g_rx):
    return db_to_linear(-loss_db - shadow_db + g_tx + g_rx)


def build_gain_matrix(scenario: Scenario, shadowing: ShadowingField | None = None) -> PathGainMatrix:
    """Evaluate every station -> receiver link of a drop.

    Nodes are taken in id order, so the result does not depend on the order
    of ``scenario.nodes``. Shadowing defaults to the run's frozen field.
    """
    cfg = scenario.config
    mues, henbs, fues = scenario.mues, scenario.henbs, scenario.fues
    n_mue, n_henb = len(mues), len(henbs)
    if shadowing is None:
        shadowing = ShadowingField.draw(cfg, scenario.run_index)
    if shadowing.macro.shape != (n_mue + n_henb,):
        raise ValueError("shadowing field does not match the scenario's node counts")
    floor = cfg.min_distance
    g_menb, g_henb, g_ue = cfg.menb_antenna_gain, cfg.henb_antenna_gain, cfg.mue_antenna_gain

    mue_xy, henb_xy, fue_xy = scenario.mue_xy, scenario.henb_xy, scenario.fue_xy
    mue_indoor = np.array([m.indoor for m in mues], dtype=bool)

    d_macro_mue = np.maximum(np.hypot(mue_xy[:, 0], mue_xy[:, 1]), floor)
    macro_mue = _gain(macro_pathloss(d_macro_mue, mue_indoor, cfg.outdoor_wall_loss),
                      shadowing.macro[:n_mue], g_menb, g_ue)

    d_femto_mue = np.maximum(np.linalg.norm(mue_xy[:, None, :] - henb_xy[None, :, :], axis=2), floor)
    femto_mue = _gain(femto_pathloss(d_femto_mue),
                      shadowing.femto[:, :n_mue].T, g_henb, g_ue)

    d_macro_fue = np.maximum(np.hypot(fue_xy[:, 0], fue_xy[:, 1]), floor)
    fue_indoor = np.array([f.indoor for f in fues], dtype=bool)
    macro_fue = _gain(macro_pathloss(d_macro_fue, fue_indoor, cfg.outdoor_wall_loss),
                      shadowing.macro[n_mue:], g_menb, g_ue)

    d_femto_fue = np.maximum(np.linalg.norm(fue_xy[:, None, :] - henb_xy[None, :, :], axis=2), floor)
    loss_fue = np.asarray(femto_pathloss(d_femto_fue))
    if n_henb and cfg.serving_link_model == "indoor":
        idx = np.arange(n_henb)
        loss_fue[idx, idx] = indoor_serving_pathloss(d_femto_fue[idx, idx])
    femto_fue = _gain(loss_fue, shadowing.femto[:, n_mue:].T, g_henb, g_ue)

    return PathGainMatrix(
        mue_ids=tuple(m.id for m in mues),
        henb_ids=tuple(h.id for h in henbs),
        fue_ids=tuple(f.id for f in fues),
        macro_mue=np.atleast_1d(macro_mue),
        femto_mue=np.asarray(femto_mue).reshape(n_mue, n_henb),
        macro_fue=np.atleast_1d(macro_fue),
        femto_fue=np.asarray(femto_fue).reshape(n_henb, n_henb),
        noise_mw=float(dbm_to_mw(cfg.noise_power_dbm)),
    )


@dataclass(frozen=True)
class SinrReport:
    """Downlink SINR state of one drop before any muting."""

    gains: PathGainMatrix
    powers: TxPowers
    gamma0: float                  # linear threshold
    signal: np.ndarray             # S[m], mW
    interference: np.ndarray       # I[m, f] = P_f G(f, m), mW
    eta: np.ndarray                # interference plus noise, mW
    gamma: np.ndarray              # linear SINR per MUE
    f_matrix: np.ndarray
    b_vector: np.ndarray
    fue_gamma: np.ndarray          # linear SINR per FUE
    aggressor_mask: np.ndarray     # (MUE x HeNB) bool, victims only
    epsilon: float

    @property
    def noise(self) -> float:
        return self.gains.noise_mw

    @property
    def mue_ids(self) -> tuple[str, ...]:
        return self.gains.mue_ids

    @property
    def henb_ids(self) -> tuple[str, ...]:
        return self.gains.henb_ids

    @property
    def gamma_db(self) -> np.ndarray:
        return linear_to_db(self.gamma)

    @property
    def fue_gamma_db(self) -> np.ndarray:
        return linear_to_db(self.fue_gamma)

    @property
    def victim_mask(self) -> np.ndarray:
        return self.gamma < self.gamma0

    @cached_property
    def victims(self) -> tuple[str, ...]:
        return tuple(m for m, v in zip(self.mue_ids, self.victim_mask) if v)

    @cached_property
    def aggressors(self) -> Mapping[str, frozenset[str]]:
        """Aggressor HeNB ids per victim id."""
        henbs = np.asarray(self.henb_ids, dtype=object)
        return {self.mue_ids[i]: frozenset(henbs[self.aggressor_mask[i]])
                for i in np.flatnonzero(self.victim_mask)}


def compute_sinr(gains: PathGainMatrix, powers: TxPowers, gamma0_db: float = 0.0,
                 epsilon: float = 0.05, complete: bool = True) -> SinrReport:
    """SINR of every MUE and FUE with all stations transmitting.

    Aggressor sets use the epsilon rule, completed as described in
    :func:`aggressor_mask` unless ``complete`` is False.
    """
    gamma0 = float(db_to_linear(gamma0_db))
    noise = gains.noise_mw
    p_f = np.asarray(powers.henb_mw, dtype=float)
    signal = powers.menb_mw * gains.macro_mue
    interference = gains.femto_mue * p_f[None, :]
    eta = interference.sum(axis=1) + noise
    gamma = signal / eta

    f_matrix = gains.femto_mue * gamma0 / gains.macro_mue[:, None]
    b_vector = gamma0 * noise / gains.macro_mue

    fue_rx = gains.femto_fue * p_f[None, :]
    fue_signal = np.diag(fue_rx).copy()
    fue_interf = fue_rx.sum(axis=1) - fue_signal + powers.menb_mw * gains.macro_fue
    fue_gamma = fue_signal / (fue_interf + noise)

    mask = aggressor_mask(interference, eta, gamma < gamma0, epsilon,
                          signal if complete else None, gamma0, noise)
    return SinrReport(gains, powers, gamma0, signal, interference, eta, gamma,
                      f_matrix, b_vector, fue_gamma, mask, epsilon)


def aggressor_mask(interference: np.ndarray, eta: np.ndarray, victim: np.ndarray,
                   epsilon: float, signal: np.ndarray | None = None,
                   gamma0: float | None = None, noise: float | None = None) -> np.ndarray:
    """Boolean (MUE x HeNB) aggressor table, rows of non-victims all False.

    HeNB f aggresses victim n when P_f G(f, n) > epsilon * eta[n]. When
    ``signal``, ``gamma0`` and ``noise`` are given the set is completed:
    if silencing the epsilon-aggressors cannot lift the victim to gamma0
    but silencing every HeNB could, the next-strongest interferers are
    added until it can. The result is always a strongest-first prefix.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    mask = (interference > epsilon * eta[:, None]) & victim[:, None]
    if signal is None or interference.shape[1] == 0 or not victim.any():
        return mask
    rows = np.flatnonzero(victim)
    interf = interference[rows]
    order = np.argsort(-interf, axis=1, kind="stable")
    sorted_i = np.take_along_axis(interf, order, axis=1)
    # residual[k]: interference left after silencing the k strongest
    total = sorted_i.sum(axis=1, keepdims=True)
    residual = np.maximum(total - np.cumsum(sorted_i, axis=1), 0.0)
    residual = np.hstack([total, residual])
    ok = signal[rows, None] >= gamma0 * (residual + noise)
    feasible = signal[rows] >= gamma0 * noise
    need = np.where(ok.any(axis=1), ok.argmax(axis=1), 0)
    need = np.where(feasible, need, 0)
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.arange(order.shape[1])[None, :], axis=1)
    mask[rows] |= rank < need[:, None]
    return mask


def _mask_for(report: SinrReport, epsilon: float, complete: bool) -> np.ndarray:
    if complete:
        return aggressor_mask(report.interference, report.eta, report.victim_mask, epsilon,
                              report.signal, report.gamma0, report.noise)
    return aggressor_mask(report.interference, report.eta, report.victim_mask, epsilon)


def detect_aggressors(report: SinrReport, epsilon: float,
                      complete: bool = False) -> dict[str, frozenset[str]]:
    """Aggressor sets per victim for an arbitrary ``epsilon``.

    With ``complete=False`` this is the bare rule: f is an aggressor of
    victim n iff P_f G(f, n) > epsilon * eta[n].
    """
    mask = _mask_for(report, epsilon, complete)
    henbs = report.henb_ids
    return {report.mue_ids[i]: frozenset(henbs[j] for j in np.flatnonzero(mask[i]))
            for i in np.flatnonzero(report.victim_mask)}


def with_epsilon(report: SinrReport, epsilon: float, complete: bool = True) -> SinrReport:
    mask = _mask_for(report, epsilon, complete)
    return replace(report, aggressor_mask=mask, epsilon=epsilon)


def analyze(scenario: Scenario, shadowing: ShadowingField | None = None) -> SinrReport:
    """Gain matrix and SINR report for a drop using its config's powers and threshold."""
    cfg = scenario.config
    gains = build_gain_matrix(scenario, shadowing)
    return compute_sinr(gains, TxPowers.from_config(cfg, len(gains.henb_ids)),
                        cfg.sinr_threshold, cfg.aggressor_epsilon, cfg.complete_aggressor_sets)


def interference_range(config: ScenarioConfig) -> float:
    """Shadow-free distance beyond which no MUE can be a victim (m).

    Worst case: the MUE sits outdoors on the macro edge and every HeNB is
    at exactly this distance. Returns ``inf`` if an edge MUE misses the
    threshold on noise alone. Shadowing is ignored, so with nonzero
    shadowing victims can still occur further out.
    """
    gamma0 = db_to_linear(config.sinr_threshold)
    noise = dbm_to_mw(config.noise_power_dbm)
    edge = dbm_to_mw(config.menb_power) * db_to_linear(
        config.menb_antenna_gain + config.mue_antenna_gain - macro_pathloss(config.macro_radius))
    budget = edge / gamma0 - noise
    if budget <= 0:
        return math.inf
    if config.num_henbs == 0:
        return 0.0
    per_henb = budget / (config.num_henbs * dbm_to_mw(config.henb_power))
    # femto loss at which one HeNB delivers exactly its share of the budget
    loss = config.henb_antenna_gain + config.mue_antenna_gain - linear_to_db(per_henb)
    return max(1000.0 * 10 ** ((loss - 127.0) / 30.0), config.apartment_size / math.sqrt(2.0))
