"""One reconciliation block: parallel SBEC over sub-blocks, then joint verification.

Every message travels through :func:`encode_message` / :func:`decode_message`
and is appended to the transcript, so the in-process transport can be swapped
for a socket without touching protocol logic.
"""

from __future__ import annotations

import hashlib
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from dataclasses import field as dc_field
from fractions import Fraction

import numpy as np

from .decoder import DecodeResult, DecoderConfig, bp_decode, disclosure_size
from .ldpc import CodePool, check_frame_length
from .rate_adapt import frame_split, make_plan, select_rate
from .sbec import Role, SbecOutcome, SbecParty, Status
from .verify import AliceVerifier, BobVerifier, FieldParams, HashKeySource, VerificationOutcome
from .wire import ProtocolError, ProtocolMessage, decode_message, encode_message

log = logging.getLogger(__name__)

# spawn-key slots for per-sub-block randomness
_PUNCTURE, _SHORTEN, _FILL_A, _FILL_B = range(4)
_VERIFY = 0xFFFF


@dataclass(frozen=True)
class BlockConfig:
    n_fr: int = 4000
    n_subblocks: int = 8
    q_est: float = 0.02
    field: FieldParams = FieldParams()
    decoder: DecoderConfig = DecoderConfig()
    max_extra_rounds: int = 10
    session_seed: int = 0
    workers: int | None = None
    # both simulated parties share decoder results for identical inputs
    share_decodes: bool = True

    def __post_init__(self):
        check_frame_length(self.n_fr)
        if self.n_subblocks < 1:
            raise ValueError("need at least one sub-block")
        if self.n_subblocks >= 0xFFFF:
            raise ValueError("sub-block ids must fit the 2-octet wire field")

    @property
    def n_sb(self) -> int:
        return frame_split(self.n_fr)[0]

    @property
    def n_b(self) -> int:
        return self.n_subblocks * self.n_sb


@dataclass
class LeakageLedger:
    syndrome_bits: int = 0
    disclosed_bits: int = 0
    verification_hash_bits: int = 0

    @property
    def total(self) -> int:
        return self.syndrome_bits + self.disclosed_bits + self.verification_hash_bits


def record_leakage(ledger: LeakageLedger, kind: str, bits: int) -> LeakageLedger:
    """Add ``bits`` to the counter for ``kind`` ("syndrome", "disclosure" or "hash")."""
    if bits < 0:
        raise ValueError("leakage cannot decrease")
    if kind == "syndrome":
        ledger.syndrome_bits += bits
    elif kind == "disclosure":
        ledger.disclosed_bits += bits
    elif kind == "hash":
        ledger.verification_hash_bits += bits
    else:
        raise ValueError(f"unknown leakage event {kind!r}")
    return ledger


@dataclass
class BlockReport:
    verified_key_length: int
    sbec_failed: int
    verification_discarded: int
    effective_subblocks: int
    ledger: LeakageLedger
    rounds: list[int]
    rates: list[str]
    sbec_status: list[str]
    verification_ack: bool | None
    transcript_sha256: str
    transcript: list[tuple[str, bytes]] = dc_field(repr=False, default_factory=list)

    def to_record(self) -> dict:
        rec = asdict(self)
        rec.pop("transcript")
        return rec


@dataclass(eq=False)
class _SubBlockRun:
    alice: SbecOutcome
    bob: SbecOutcome
    rate: Fraction
    syndrome_bits: int
    disclosure_rounds: int
    transcript: list[tuple[str, bytes]]


class _SharedDecoder:
    """Memo for a pure decoder called by two co-located parties with identical inputs.

    An entry is dropped once reused, so a pair that stays in lockstep keeps at
    most one result alive; diverging inputs simply miss and decode afresh.
    """

    def __init__(self):
        self._memo: dict[tuple, DecodeResult] = {}

    def __call__(self, delta_s, priors, H, config):
        key = (id(H), config, delta_s.tobytes(), priors.tobytes())
        hit = self._memo.pop(key, None)
        if hit is not None:
            return hit
        result = bp_decode(delta_s, priors, H, config)
        self._memo[key] = result
        return result


def _relay(direction: str, msg: ProtocolMessage, transcript: list) -> ProtocolMessage:
    frame = encode_message(msg)
    transcript.append((direction, frame))
    return decode_message(frame)


def _failed(rounds: int, disclosed: int, reason: str) -> SbecOutcome:
    return SbecOutcome(Status.FAILED, None, disclosed, rounds, reason)


def run_subblock(
    index: int, alice_bits: np.ndarray, bob_bits: np.ndarray, pool: CodePool, config: BlockConfig
) -> _SubBlockRun:
    """Run both SBEC state machines for one sub-block over the message relay."""
    rate, n_shrt, n_pnct = select_rate(config.q_est, config.n_fr, pool.rates)
    H = pool[rate]

    def seed(slot: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(config.session_seed, spawn_key=(index, slot))

    plan = make_plan(H, n_shrt, n_pnct, seed(_PUNCTURE), seed(_SHORTEN))
    common = dict(config=config.decoder, max_extra_rounds=config.max_extra_rounds, sub_block_id=index)
    if config.share_decodes:
        common["decode"] = _SharedDecoder()
    alice = SbecParty(Role.ALICE, alice_bits, plan, H, config.q_est, puncture_fill_seed=seed(_FILL_A), **common)
    bob = SbecParty(Role.BOB, bob_bits, plan, H, config.q_est, puncture_fill_seed=seed(_FILL_B), **common)

    transcript: list[tuple[str, bytes]] = []
    to_bob, to_alice = alice.start(), bob.start()
    disclosure_rounds = 0
    try:
        while to_bob is not None or to_alice is not None:
            if (to_bob is None) != (to_alice is None):
                raise ProtocolError("parties disagree on whether error correction has finished")
            recv_b = _relay("A>B", to_bob, transcript)
            recv_a = _relay("B>A", to_alice, transcript)
            to_bob = alice.receive(recv_a)
            to_alice = bob.receive(recv_b)
            if to_bob is not None:
                disclosure_rounds += 1
        a_out, b_out = alice.outcome, bob.outcome
        if a_out.status is not b_out.status:
            raise ProtocolError("parties disagree on the sub-block status")
    except ProtocolError as exc:
        log.warning("sub-block %d aborted: %s", index, exc)
        a_out = _failed(alice.round, alice.disclosed_bit_count, str(exc))
        b_out = _failed(bob.round, bob.disclosed_bit_count, str(exc))
    return _SubBlockRun(a_out, b_out, rate, H.n_rows, disclosure_rounds, transcript)


def verify_subblocks(
    alice_parts, bob_parts, config: BlockConfig, ledger: LeakageLedger, transcript: list
) -> tuple[np.ndarray, np.ndarray, VerificationOutcome]:
    """Joint verification of corrected sub-blocks; returns both verified keys and Alice's outcome."""
    keys = HashKeySource(
        np.random.SeedSequence(config.session_seed, spawn_key=(_VERIFY,)).generate_state(4).tobytes()
    )
    alice_v = AliceVerifier(alice_parts, config.field, keys)
    bob_v = BobVerifier(bob_parts, config.field)
    msg = alice_v.start()
    turn = "A>B"
    while msg is not None:
        msg = _relay(turn, msg, transcript)
        if turn == "A>B":
            msg, turn = bob_v.receive(msg), "B>A"
        else:
            msg, turn = alice_v.receive(msg), "A>B"
    if not (alice_v.done and bob_v.done):
        raise ProtocolError("verification ended with a party still waiting")
    if alice_v.outcome.kept != bob_v.outcome.kept:
        raise ProtocolError("parties kept different sub-blocks")
    record_leakage(ledger, "hash", alice_v.outcome.hash_bits)
    return alice_v.outcome.verified_key, bob_v.outcome.verified_key, alice_v.outcome


def run_block(
    alice_sifted, bob_sifted, config: BlockConfig, pool: CodePool
) -> tuple[np.ndarray, np.ndarray, BlockReport]:
    """Reconcile one block and return ``(K_ver_A, K_ver_B, report)``."""
    alice_sifted = np.asarray(alice_sifted, dtype=np.uint8)
    bob_sifted = np.asarray(bob_sifted, dtype=np.uint8)
    if alice_sifted.shape != (config.n_b,) or bob_sifted.shape != (config.n_b,):
        raise ValueError(f"both sifted blocks must have {config.n_b} bits")
    if pool.n_fr != config.n_fr:
        raise ValueError(f"code pool has n_fr={pool.n_fr}, config says {config.n_fr}")

    n_sb = config.n_sb
    a_parts = alice_sifted.reshape(config.n_subblocks, n_sb)
    b_parts = bob_sifted.reshape(config.n_subblocks, n_sb)
    workers = config.workers or min(config.n_subblocks, os.cpu_count() or 1)

    def job(i: int) -> _SubBlockRun:
        return run_subblock(i, a_parts[i], b_parts[i], pool, config)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            runs = list(ex.map(job, range(config.n_subblocks)))
    else:
        runs = [job(i) for i in range(config.n_subblocks)]

    ledger = LeakageLedger()
    transcript: list[tuple[str, bytes]] = []
    survivors = []
    for i, run in enumerate(runs):
        record_leakage(ledger, "syndrome", run.syndrome_bits)
        for _ in range(run.disclosure_rounds):
            record_leakage(ledger, "disclosure", disclosure_size(run.rate))
        transcript.extend(run.transcript)
        if run.alice.status is Status.CORRECTED:
            survivors.append(i)

    if survivors:
        k_a, k_b, result = verify_subblocks(
            [runs[i].alice.corrected_key for i in survivors],
            [runs[i].bob.corrected_key for i in survivors],
            config, ledger, transcript,
        )
        ack = result.ack
        discarded = [survivors[j] for j in result.discarded]
    else:
        k_a = k_b = np.empty(0, dtype=np.uint8)
        ack, discarded = None, []

    digest = hashlib.sha256()
    for direction, frame in transcript:
        digest.update(direction.encode())
        digest.update(len(frame).to_bytes(4, "big"))
        digest.update(frame)

    report = BlockReport(
        verified_key_length=int(k_a.size),
        sbec_failed=config.n_subblocks - len(survivors),
        verification_discarded=len(discarded),
        effective_subblocks=len(survivors),
        ledger=ledger,
        rounds=[run.alice.rounds_used for run in runs],
        rates=[f"{float(run.rate):.2f}" for run in runs],
        sbec_status=[run.alice.status.value for run in runs],
        verification_ack=ack,
        transcript_sha256=digest.hexdigest(),
        transcript=transcript,
    )
    return k_a, k_b, report
