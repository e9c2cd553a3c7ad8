"""Muted-rate selection and ABSF bitmaps.

A victim MUE ``m`` with signal ``S``, aggressor interference ``I_a``, other
interference ``I_o`` and noise ``sigma`` reaches the threshold when its
aggressors blank a fraction ``alpha`` of the frame such that::

    S / (I_a * (1 - alpha) + I_o + sigma) >= gamma0

The smallest such alpha is the closed form used by default. The same
requirement written over the normalized interference matrix ``F`` gives a
linear system ``A alpha = B`` whose least-norm solution is available as a
cross-check.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .radio import SinrReport

log = logging.getLogger(__name__)

COND_LIMIT = 1e12


@dataclass(frozen=True)
class FrameConfig:
    n_subframes: int = 10
    subframe_duration: float = 1.0   # ms
    n_rb: int = 50

    def __post_init__(self):
        if self.n_subframes < 1 or self.n_rb < 1:
            raise ValueError("n_subframes and n_rb must be >= 1")

    @classmethod
    def from_config(cls, config) -> "FrameConfig":
        return cls(config.num_subframes, config.subframe_duration, config.num_resource_blocks)


# LTE channel bandwidth (MHz) -> downlink resource blocks
RB_TABLE = {1.4: 6, 3.0: 15, 5.0: 25, 10.0: 50, 15.0: 75, 20.0: 100}


def resource_blocks(bandwidth_hz: float) -> int:
    mhz = bandwidth_hz / 1e6
    for bw, n in RB_TABLE.items():
        if math.isclose(mhz, bw):
            return n
    raise ValueError(f"no LTE resource-block count for {mhz} MHz")


@dataclass(frozen=True)
class MutedRateRequirement:
    mue_id: str
    alpha: float
    feasible: bool = True

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


def muted_rate(signal: float, aggressor_interference: float, noise: float, gamma0: float,
               other_interference: float = 0.0) -> tuple[float, bool]:
    """Smallest blanking fraction meeting ``gamma0``; returns ``(alpha, feasible)``.

    Infeasible (even alpha = 1 leaves the SINR short) returns ``(1.0, False)``.
    """
    floor = noise + other_interference
    if signal >= gamma0 * (aggressor_interference + floor):
        return 0.0, True
    if aggressor_interference <= 0.0 or signal < gamma0 * floor:
        return 1.0, False
    alpha = 1.0 - (signal / gamma0 - floor) / aggressor_interference
    if alpha > 1.0:
        return 1.0, False
    return max(alpha, 0.0), True


def _split_interference(report: SinrReport, i: int) -> tuple[float, float]:
    row = report.interference[i]
    mask = report.aggressor_mask[i]
    return float(row[mask].sum()), float(row[~mask].sum())


def required_rate_closed_form(report: SinrReport, mue: str | int,
                              gamma0: float | None = None) -> MutedRateRequirement:
    """Requirement of one MUE, muting its aggressors only."""
    i = report.mue_ids.index(mue) if isinstance(mue, str) else int(mue)
    g0 = report.gamma0 if gamma0 is None else gamma0
    i_agg, i_other = _split_interference(report, i)
    alpha, ok = muted_rate(float(report.signal[i]), i_agg, report.noise, g0, i_other)
    return MutedRateRequirement(report.mue_ids[i], alpha, ok)


def required_rates(report: SinrReport) -> list[MutedRateRequirement]:
    """Closed-form requirement of every victim, in MUE order."""
    return [required_rate_closed_form(report, int(i)) for i in np.flatnonzero(report.victim_mask)]


# -- least-norm path ------------------------------------------------------

class IllConditioned(np.linalg.LinAlgError):
    pass


def least_norm_solve(A, B, cond_limit: float = COND_LIMIT) -> np.ndarray:
    """Minimum-norm solution of ``A x = B`` for full-row-rank ``A``: A^T (A A^T)^-1 B."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(-1)
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"A has {A.shape[0]} rows but B has {B.shape[0]} entries")
    if A.shape[0] > A.shape[1]:
        raise ValueError("least-norm solution needs at least as many columns as rows")
    # row scaling leaves {x : A x = B} and hence its least-norm element unchanged
    norms = np.linalg.norm(A, axis=1)
    if np.any(norms == 0):
        raise IllConditioned("A has an all-zero row")
    A, B = A / norms[:, None], B / norms
    gram = A @ A.T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > cond_limit:
        raise IllConditioned(f"A A^T condition number {cond:.3g} exceeds {cond_limit:.0e}")
    return A.T @ np.linalg.solve(gram, B)


def victim_system(f_matrix, b_vector, menb_power, henb_powers, aggressor_mask=None):
    """Per-victim reading of the matrix program.

    Row m constrains only alpha_m: ``a_m alpha_m = B_m`` where ``a_m`` is the
    aggressors' normalized interference ``sum_f F[m, f] P_f`` and
    ``B_m = a_m - P_M + b_m + (non-aggressor normalized interference)``.
    ``A`` is therefore diagonal. Returns ``(A, B)``.
    """
    F = np.atleast_2d(np.asarray(f_matrix, dtype=float))
    weighted = F * np.asarray(henb_powers, dtype=float)[None, :]
    mask = np.ones_like(weighted, dtype=bool) if aggressor_mask is None else np.asarray(aggressor_mask)
    a = np.where(mask, weighted, 0.0).sum(axis=1)
    other = np.where(mask, 0.0, weighted).sum(axis=1)
    B = a - np.broadcast_to(menb_power, a.shape) + np.asarray(b_vector, dtype=float) + other
    return np.diag(a), B


def henb_system(f_matrix, b_vector, menb_power, henb_powers, aggressor_mask=None):
    """Per-HeNB reading: one unknown per HeNB, one row per victim.

    Row m reads ``sum_f F[m, f] P_f alpha_f = B_m`` with non-aggressor
    columns zeroed; ``A`` is generally wide (victims x HeNBs).
    """
    F = np.atleast_2d(np.asarray(f_matrix, dtype=float))
    weighted = F * np.asarray(henb_powers, dtype=float)[None, :]
    if aggressor_mask is not None:
        weighted = np.where(aggressor_mask, weighted, 0.0)
    _, B = victim_system(f_matrix, b_vector, menb_power, henb_powers, aggressor_mask)
    return weighted, B


@dataclass(frozen=True)
class LeastNormResult:
    alpha: np.ndarray          # clamped to [0, 1]
    raw: np.ndarray            # before clamping
    feasible: np.ndarray
    fallback: bool = False
    diagnostic: str = ""


def required_rates_least_norm(f_matrix, b_vector, menb_power, henb_powers,
                              aggressor_mask=None, closed_form=None) -> LeastNormResult:
    """Per-victim rates from ``A^T (A A^T)^-1 B`` (rows are victims).

    If ``A A^T`` is singular or badly conditioned the closed-form rates
    ``closed_form`` (a sequence of :class:`MutedRateRequirement`) are used
    instead and the result is flagged with ``fallback=True``.
    """
    A, B = victim_system(f_matrix, b_vector, menb_power, henb_powers, aggressor_mask)
    if B.size == 0:
        return LeastNormResult(np.zeros(0), np.zeros(0), np.zeros(0, dtype=bool))
    try:
        raw = least_norm_solve(A, B)
    except np.linalg.LinAlgError as exc:
        if closed_form is None:
            raise
        log.info("least-norm rates fell back to closed form: %s", exc)
        alpha = np.array([r.alpha for r in closed_form], dtype=float)
        feasible = np.array([r.feasible for r in closed_form], dtype=bool)
        return LeastNormResult(alpha, alpha.copy(), feasible, True, str(exc))
    # noise-limited rows: even full muting leaves B above a
    a = np.diag(A)
    menb = np.broadcast_to(menb_power, a.shape)
    b = np.asarray(b_vector, dtype=float)
    other = B - a + menb - b
    feasible = menb - b - other >= 0
    return LeastNormResult(np.clip(raw, 0.0, 1.0), raw, feasible | (raw <= 0))


def henb_rates_least_norm(f_matrix, b_vector, menb_power, henb_powers,
                          aggressor_mask=None) -> np.ndarray:
    """Per-HeNB least-norm rates (alternative reading), clamped to [0, 1].

    All-zero HeNB columns are dropped before solving and get rate 0.
    """
    A, B = henb_system(f_matrix, b_vector, menb_power, henb_powers, aggressor_mask)
    used = np.any(A != 0, axis=0)
    out = np.zeros(A.shape[1])
    if B.size:
        out[used] = least_norm_solve(A[:, used], B)
    return np.clip(out, 0.0, 1.0)


def report_rates_least_norm(report: SinrReport) -> LeastNormResult:
    """Least-norm rates for every victim of ``report``."""
    rows = report.victim_mask
    return required_rates_least_norm(
        report.f_matrix[rows], report.b_vector[rows], report.powers.menb_mw,
        report.powers.henb_mw, report.aggressor_mask[rows], closed_form=required_rates(report))


# -- aggregation and quantization ------------------------------------------

def aggregate_per_henb(requirements: Iterable[MutedRateRequirement],
                       victim_sets: Mapping[str, Iterable[str]]):
    """Per-HeNB rate: the largest requirement among the victims it affects."""
    alpha = {r.mue_id: r.alpha for r in requirements}
    return {f: max((alpha[m] for m in victims), default=0.0)
            for f, victims in victim_sets.items()}


def blanked_count(alpha: float, n_subframes: int) -> int:
    """Smallest n with n / n_subframes >= alpha (compared in floating point)."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    n = min(math.ceil(alpha * n_subframes), n_subframes)
    while n > 0 and (n - 1) / n_subframes >= alpha:
        n -= 1
    while n / n_subframes < alpha:
        n += 1
    return n


def quantize_pattern(alpha: float, frame: FrameConfig = FrameConfig(), offset: int = 0) -> np.ndarray:
    """Contiguous (cyclic) block of blanked subframes starting at ``offset``."""
    n = blanked_count(alpha, frame.n_subframes)
    bitmap = np.zeros(frame.n_subframes, dtype=bool)
    bitmap[(offset + np.arange(n)) % frame.n_subframes] = True
    return bitmap


@dataclass(frozen=True)
class MutingPlan:
    """Blanking decisions for every HeNB of a drop.

    ``alpha[f]`` is the rate the bitmap was built from (after coalition
    alignment); ``requested[f]`` the per-HeNB rate before alignment.
    ``coalition[f]`` is -1 for HeNBs outside every coalition.
    """

    henb_ids: tuple[str, ...]
    alpha: np.ndarray
    bitmaps: np.ndarray              # (HeNB x subframe) bool
    coalition: np.ndarray
    requested: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.requested is None:
            object.__setattr__(self, "requested", np.asarray(self.alpha, dtype=float).copy())

    @property
    def blank_fraction(self) -> np.ndarray:
        if self.bitmaps.size == 0:
            return np.zeros(len(self.henb_ids))
        return self.bitmaps.mean(axis=1)

    def rate(self, henb: str) -> float:
        return float(self.alpha[self.henb_ids.index(henb)])

    def bitmap(self, henb: str) -> np.ndarray:
        return self.bitmaps[self.henb_ids.index(henb)]

    @classmethod
    def empty(cls, henb_ids: Sequence[str], frame: FrameConfig) -> "MutingPlan":
        n = len(henb_ids)
        return cls(tuple(henb_ids), np.zeros(n), np.zeros((n, frame.n_subframes), dtype=bool),
                   np.full(n, -1))


def plan_from_rates(henb_ids: Sequence[str], rates: Mapping[str, float], frame: FrameConfig,
                    offsets: Mapping[str, int] | None = None) -> MutingPlan:
    """Independent (unaligned) bitmaps from per-HeNB rates; missing ids get 0."""
    alpha = np.array([float(rates.get(h, 0.0)) for h in henb_ids])
    offsets = offsets or {}
    bitmaps = np.zeros((len(henb_ids), frame.n_subframes), dtype=bool)
    for k, (h, a) in enumerate(zip(henb_ids, alpha)):
        bitmaps[k] = quantize_pattern(a, frame, offsets.get(h, 0))
    return MutingPlan(tuple(henb_ids), alpha, bitmaps, np.full(len(henb_ids), -1), alpha.copy())


def muted_sinr(report: SinrReport, blank_fraction) -> np.ndarray:
    """Linear MUE SINR with HeNB f's interference scaled by ``1 - blank_fraction[f]``."""
    q = np.asarray(blank_fraction, dtype=float)
    eta = report.interference @ (1.0 - q) + report.noise
    return report.signal / eta
