"""Syndrome belief-propagation decoding in the LLR domain.

LLRs are ``log(P[e=0] / P[e=1])`` for each error bit. The check-node update
is the exact tanh product rule with the syndrome bit flipping the sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numba
import numpy as np

from .ldpc import ParityCheckMatrix
from .rate_adapt import ExtensionPlan


class SubBlockExhausted(RuntimeError):
    """Not enough undisclosed positions left for another disclosure round."""


@dataclass(frozen=True)
class DecoderConfig:
    max_iterations: int = 60
    llr_clamp: float = 25.0
    known_llr_magnitude: float = 25.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.known_llr_magnitude <= self.llr_clamp:
            raise ValueError("need 0 < known_llr_magnitude <= llr_clamp")


@dataclass(frozen=True, eq=False)
class DecodeResult:
    converged: bool
    error_pattern: np.ndarray
    final_llrs: np.ndarray
    iterations_used: int


def init_llrs(
    q_est: float,
    plan: ExtensionPlan,
    known_error_bits: Mapping[int, int],
    config: DecoderConfig = DecoderConfig(),
) -> np.ndarray:
    """Prior LLRs: channel value on sifted bits, 0 on punctured, +-known magnitude on known bits."""
    if not 0.0 < q_est < 0.5:
        raise ValueError(f"q_est must lie in (0, 0.5), got {q_est!r}")
    llr = np.zeros(plan.n_fr)
    llr[plan.omega] = math.log((1.0 - q_est) / q_est)
    if known_error_bits:
        pos = np.fromiter(known_error_bits.keys(), dtype=np.int64)
        bits = np.fromiter(known_error_bits.values(), dtype=np.int64)
        llr[pos] = np.where(bits == 0, config.known_llr_magnitude, -config.known_llr_magnitude)
    return llr


@numba.njit(cache=True, nogil=True)
def _check_update_args(row_ptr, t, syndrome, tmax, out):  # pragma: no cover - compiled
    """Per edge: signed product of the other tanh values on its row, kept inside +-tmax."""
    for r in range(row_ptr.shape[0] - 1):
        a = row_ptr[r]
        b = row_ptr[r + 1]
        sign = -1.0 if syndrome[r] else 1.0
        acc = sign
        for e in range(a, b):
            out[e] = acc
            acc *= t[e]
        acc = 1.0
        for e in range(b - 1, a - 1, -1):
            x = out[e] * acc
            if x > tmax:
                x = tmax
            elif x < -tmax:
                x = -tmax
            out[e] = x
            acc *= t[e]


@numba.njit(cache=True, nogil=True)
def _variable_update(row_ptr, col_idx, priors, c2v, syndrome, clamp, v2c, post, hard):  # pragma: no cover
    """Posteriors, outgoing messages and hard decision; returns whether the decision fits the syndrome."""
    for v in range(priors.shape[0]):
        post[v] = priors[v]
    for e in range(col_idx.shape[0]):
        post[col_idx[e]] += c2v[e]
    for v in range(priors.shape[0]):
        x = min(max(post[v], -clamp), clamp)
        post[v] = x
        hard[v] = 1 if x < 0.0 else 0
    ok = True
    for r in range(row_ptr.shape[0] - 1):
        s = 0
        for e in range(row_ptr[r], row_ptr[r + 1]):
            c = col_idx[e]
            v2c[e] = min(max(post[c] - c2v[e], -clamp), clamp)
            s ^= hard[c]
        if s != syndrome[r]:
            ok = False
    return ok


def bp_decode(
    delta_s, priors, H: ParityCheckMatrix, config: DecoderConfig = DecoderConfig()
) -> DecodeResult:
    """Find an error pattern whose syndrome is ``delta_s``.

    Runs sum-product message passing from ``priors`` and stops at the first
    iteration whose hard decision satisfies every check.
    """
    delta_s = np.ascontiguousarray(delta_s, dtype=np.uint8)
    priors = np.ascontiguousarray(priors, dtype=np.float64)
    if delta_s.shape != (H.n_rows,):
        raise ValueError(f"syndrome length {delta_s.size} != n_rows={H.n_rows}")
    if priors.shape != (H.n_cols,):
        raise ValueError(f"prior length {priors.size} != n_cols={H.n_cols}")
    clamp = config.llr_clamp
    priors = np.clip(priors, -clamp, clamp)
    # |product| <= tanh(clamp/2) keeps the check output within +-clamp
    tmax = math.tanh(clamp / 2.0)

    v2c = priors[H.col_idx]
    c2v = np.empty_like(v2c)
    ex = np.empty_like(v2c)
    t = np.empty_like(v2c)
    post = np.empty(H.n_cols)
    hard = np.zeros(H.n_cols, dtype=np.uint8)
    for it in range(1, config.max_iterations + 1):
        # tanh(x/2) = (e^x - 1) / (e^x + 1); |x| <= clamp so e^x is finite
        np.exp(v2c, out=ex)
        np.divide(ex - 1.0, ex + 1.0, out=t)
        _check_update_args(H.row_ptr, t, delta_s, tmax, c2v)
        # 2 atanh(x) = log((1 + x) / (1 - x))
        np.log((1.0 + c2v) / (1.0 - c2v), out=c2v)
        np.clip(c2v, -clamp, clamp, out=c2v)
        if _variable_update(H.row_ptr, H.col_idx, priors, c2v, delta_s, clamp, v2c, post, hard):
            return DecodeResult(True, hard, post, it)
    return DecodeResult(False, hard, post, config.max_iterations)


def disclosure_size(rate: Fraction) -> int:
    """Positions disclosed per extra round: ceil(56 - 40 R)."""
    return math.ceil(56 - 40 * Fraction(rate))


def select_disclosure(result: DecodeResult, rate: Fraction, eligible) -> np.ndarray:
    """The ``d`` eligible positions with the least reliable final LLRs (ties: lowest index)."""
    d = disclosure_size(rate)
    eligible = np.asarray(eligible, dtype=np.int64)
    if eligible.size < d:
        raise SubBlockExhausted(f"{eligible.size} eligible positions left, {d} needed")
    mags = np.abs(result.final_llrs[eligible])
    order = np.lexsort((eligible, mags))
    return eligible[order[:d]]
