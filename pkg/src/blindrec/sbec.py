"""Per-sub-block symmetric blind error correction.

Both parties run the same decoder on the same inputs (relative syndrome,
known error bits, position roles), so they reach identical decisions and
agree on disclosure positions without negotiating them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .decoder import (
    DecodeResult,
    DecoderConfig,
    SubBlockExhausted,
    bp_decode,
    init_llrs,
    select_disclosure,
)
from .ldpc import ParityCheckMatrix, compute_syndrome
from .rate_adapt import ExtensionPlan, build_extended_key
from .wire import ProtocolError, ProtocolMessage, Tag


class Role(enum.Enum):
    ALICE = "alice"
    BOB = "bob"


class Status(enum.Enum):
    CORRECTED = "corrected"
    FAILED = "failed"


@dataclass(frozen=True, eq=False)
class SbecOutcome:
    status: Status
    corrected_key: np.ndarray | None
    disclosed_bit_count: int
    rounds_used: int
    reason: str = ""


class SbecParty:
    """One party's state machine for a single sub-block.

    Drive it with :meth:`start` and then :meth:`receive` for every peer
    message; ``receive`` returns the next outgoing message or ``None`` once
    :attr:`outcome` is set. ``decode`` must behave like :func:`bp_decode`.
    """

    def __init__(
        self,
        role: Role,
        sifted,
        plan: ExtensionPlan,
        H: ParityCheckMatrix,
        q_est: float,
        *,
        puncture_fill_seed,
        config: DecoderConfig = DecoderConfig(),
        max_extra_rounds: int = 10,
        sub_block_id: int | None = None,
        decode=bp_decode,
    ):
        if H.rate != plan.rate or H.n_cols != plan.n_fr:
            raise ValueError("extension plan does not belong to this matrix")
        self.role = role
        self.sifted = np.asarray(sifted, dtype=np.uint8)
        self.plan = plan
        self.H = H
        self.q_est = q_est
        self.config = config
        self.max_extra_rounds = max_extra_rounds
        self.sub_block_id = sub_block_id
        self._decode = decode

        self.extended_key = build_extended_key(self.sifted, plan, puncture_fill_seed)
        self.error_pattern = np.zeros(plan.n_fr, dtype=np.uint8)
        self.known = {int(p): 0 for p in plan.shortened}
        self.round = 0
        self.disclosed_bit_count = 0
        self.own_syndrome = compute_syndrome(self.extended_key.bits, H)
        self.delta_s: np.ndarray | None = None
        self.pending: np.ndarray | None = None
        self.outcome: SbecOutcome | None = None
        self.last_result: DecodeResult | None = None
        self.phase = "ready"

    @property
    def done(self) -> bool:
        return self.outcome is not None

    @property
    def shortened_now(self) -> frozenset[int]:
        return frozenset(self.known)

    def start(self) -> ProtocolMessage:
        self._expect("ready")
        self.phase = "syndrome_sent"
        return ProtocolMessage.with_bits(Tag.SYNDROME, self.own_syndrome, self.sub_block_id)

    def receive(self, msg: ProtocolMessage) -> ProtocolMessage | None:
        if msg.sub_block_id != self.sub_block_id:
            raise ProtocolError(f"message for sub-block {msg.sub_block_id}, expected {self.sub_block_id}")
        if msg.tag is Tag.SYNDROME:
            self._expect("syndrome_sent")
            self.delta_s = self.own_syndrome ^ msg.bits(self.H.n_rows)
        elif msg.tag is Tag.DISCLOSE:
            self._expect("disclose_sent")
            positions = self.pending
            peer = msg.bits(positions.size)
            self.apply_disclosure(positions, self.extended_key.bits[positions], peer)
            self.pending = None
        else:
            raise ProtocolError(f"unexpected {msg.tag.name} during error correction")
        return self._decode_step()

    def apply_disclosure(self, positions, own_bits, peer_bits) -> None:
        """Record disclosed values: the error bit is known to be ``own ^ peer``."""
        positions = np.asarray(positions, dtype=np.int64)
        diff = np.asarray(own_bits, dtype=np.uint8) ^ np.asarray(peer_bits, dtype=np.uint8)
        for p, bit in zip(positions.tolist(), diff.tolist()):
            if p in self.known:
                raise ValueError(f"position {p} is already shortened")
            self.known[p] = bit
            self.error_pattern[p] = bit
        self.disclosed_bit_count += positions.size

    def finalize(self, result: DecodeResult) -> SbecOutcome:
        if not result.converged:
            raise ValueError("cannot finalize a decode that did not converge")
        self.error_pattern = result.error_pattern.copy()
        if self.role is Role.ALICE:
            omega = self.plan.omega
            key = self.extended_key.bits[omega] ^ self.error_pattern[omega]
        else:
            key = self.sifted.copy()
        return SbecOutcome(Status.CORRECTED, key, self.disclosed_bit_count, self.round)

    def _decode_step(self) -> ProtocolMessage | None:
        self.round += 1
        priors = init_llrs(self.q_est, self.plan, self.known, self.config)
        result = self._decode(self.delta_s, priors, self.H, self.config)
        self.last_result = result
        if result.converged:
            return self._finish(self.finalize(result))
        if self.round > self.max_extra_rounds:
            return self._fail("disclosure budget exhausted")
        eligible = np.setdiff1d(np.arange(self.plan.n_fr), np.fromiter(self.known, dtype=np.int64))
        try:
            positions = select_disclosure(result, self.plan.rate, eligible)
        except SubBlockExhausted as exc:
            return self._fail(str(exc))
        self.pending = positions
        self.phase = "disclose_sent"
        return ProtocolMessage.with_bits(Tag.DISCLOSE, self.extended_key.bits[positions], self.sub_block_id)

    def _fail(self, reason: str) -> None:
        outcome = SbecOutcome(Status.FAILED, None, self.disclosed_bit_count, self.round, reason)
        return self._finish(outcome)

    def _finish(self, outcome: SbecOutcome) -> None:
        self.outcome = outcome
        self.phase = "done"
        return None

    def _expect(self, phase: str) -> None:
        if self.phase != phase:
            raise ProtocolError(f"{self.role.value} is in phase {self.phase!r}, not {phase!r}")
