"""Rate selection and extended-key construction with shortened/punctured symbols."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .ldpc import RATES, ParityCheckMatrix, binary_entropy, check_frame_length


class QberTooHighError(ValueError):
    """No rate in the pool can absorb the estimated error rate."""


def frame_split(n_fr: int) -> tuple[int, int]:
    """Return ``(n_sb, n_ext)``: sifted bits per frame (95 %) and extension symbols (5 %)."""
    check_frame_length(n_fr)
    return n_fr * 19 // 20, n_fr // 20


def shortened_count(q_est: float, n_fr: int, rate: Fraction) -> int:
    n_sb, _ = frame_split(n_fr)
    return math.ceil(binary_entropy(q_est) * n_fr - float(n_sb * (1 - Fraction(rate))))


def select_rate(
    q_est: float, n_fr: int, pool_rates: Sequence[Fraction] = RATES
) -> tuple[Fraction, int, int]:
    """Pick the highest pool rate for which both extension counts are non-negative.

    Returns ``(rate, n_shrt, n_pnct)``. When ``q_est`` is so low that even the
    highest rate needs a negative number of shortened symbols, the highest rate
    is used with no shortening and all extension symbols punctured.
    """
    if not 0.0 < q_est < 0.5:
        raise ValueError(f"q_est must lie in (0, 0.5), got {q_est!r}")
    _, n_ext = frame_split(n_fr)
    rates = sorted((Fraction(r) for r in pool_rates), reverse=True)
    for r in rates:
        n_shrt = shortened_count(q_est, n_fr, r)
        if 0 <= n_shrt <= n_ext:
            return r, n_shrt, n_ext - n_shrt
    if shortened_count(q_est, n_fr, rates[0]) < 0:
        return rates[0], 0, n_ext
    raise QberTooHighError(f"QBER estimate {q_est} too high for the code pool at n_fr={n_fr}")


def choose_punctured(H: ParityCheckMatrix, n_pnct: int, seed) -> np.ndarray:
    """Untainted puncturing: greedily pick columns whose check rows are all untouched.

    Candidates are scanned in a seed-determined order. If fewer than ``n_pnct``
    untainted columns exist, the rest are drawn uniformly from the unselected ones.
    """
    if not 0 <= n_pnct <= H.n_cols:
        raise ValueError(f"cannot puncture {n_pnct} of {H.n_cols} positions")
    rng = np.random.default_rng(seed)
    if n_pnct == 0:
        return np.empty(0, dtype=np.int64)
    used_rows = np.zeros(H.n_rows, dtype=bool)
    chosen: list[int] = []
    for c in rng.permutation(H.n_cols):
        rows = H.column_rows(int(c))
        if not used_rows[rows].any():
            used_rows[rows] = True
            chosen.append(int(c))
            if len(chosen) == n_pnct:
                break
    if len(chosen) < n_pnct:
        rest = np.setdiff1d(np.arange(H.n_cols), chosen)
        chosen.extend(rng.choice(rest, n_pnct - len(chosen), replace=False).tolist())
    return np.sort(np.asarray(chosen, dtype=np.int64))


def choose_shortened(free_positions, n_shrt: int, seed) -> np.ndarray:
    free = np.unique(np.asarray(free_positions, dtype=np.int64))
    if not 0 <= n_shrt <= free.size:
        raise ValueError(f"cannot shorten {n_shrt} of {free.size} free positions")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(free, n_shrt, replace=False))


@dataclass(frozen=True, eq=False)
class ExtensionPlan:
    """Role of every frame position for one sub-block.

    ``omega`` lists the positions carrying sifted bits, in sifted-key order.
    """

    rate: Fraction
    shortened: np.ndarray
    punctured: np.ndarray
    omega: np.ndarray
    n_fr: int

    def __post_init__(self):
        n_sb, n_ext = frame_split(self.n_fr)
        if self.shortened.size + self.punctured.size != n_ext or self.omega.size != n_sb:
            raise ValueError("extension plan sizes do not match the frame split")
        allpos = np.concatenate([self.shortened, self.punctured, self.omega])
        if not np.array_equal(np.sort(allpos), np.arange(self.n_fr)):
            raise ValueError("shortened, punctured and omega must partition the frame")

    @property
    def n_shrt(self) -> int:
        return int(self.shortened.size)

    @property
    def n_pnct(self) -> int:
        return int(self.punctured.size)


def make_plan(
    H: ParityCheckMatrix, n_shrt: int, n_pnct: int, puncture_seed, shorten_seed
) -> ExtensionPlan:
    """Shared plan: punctured positions first, shortened among the rest, omega = remainder."""
    punctured = choose_punctured(H, n_pnct, puncture_seed)
    free = np.setdiff1d(np.arange(H.n_cols), punctured)
    shortened = choose_shortened(free, n_shrt, shorten_seed)
    omega = np.setdiff1d(free, shortened)
    return ExtensionPlan(H.rate, shortened, punctured, omega, H.n_cols)


@dataclass(frozen=True, eq=False)
class ExtendedKey:
    bits: np.ndarray
    plan: ExtensionPlan

    def sifted(self) -> np.ndarray:
        return self.bits[self.plan.omega]


def build_extended_key(sifted, plan: ExtensionPlan, puncture_fill_seed) -> ExtendedKey:
    """Embed the sifted sub-block into a frame.

    Shortened positions are zero; punctured ones get private random bits.
    """
    sifted = np.asarray(sifted, dtype=np.uint8)
    if sifted.shape != plan.omega.shape:
        raise ValueError(f"sifted length {sifted.size} != |omega| = {plan.omega.size}")
    bits = np.zeros(plan.n_fr, dtype=np.uint8)
    bits[plan.omega] = sifted
    rng = np.random.default_rng(puncture_fill_seed)
    bits[plan.punctured] = rng.integers(0, 2, plan.punctured.size, dtype=np.uint8)
    return ExtendedKey(bits, plan)
