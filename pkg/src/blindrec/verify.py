"""Polynomial universal hashing over a prime field and the two-phase key verification.

A block is first checked with a single hash. Only if that mismatches does
Alice send one freshly keyed hash per sub-block, after which mismatched
sub-blocks are dropped on both sides.
"""

from __future__ import annotations

import hashlib
import math
import secrets
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from sympy import isprime

from .wire import (
    ProtocolError,
    ProtocolMessage,
    Tag,
    pack_indices,
    pack_key_tag_pairs,
    unpack_indices,
    unpack_key_tag_pairs,
)

DEFAULT_PRIME = 2**50 - 27


@dataclass(frozen=True)
class FieldParams:
    p: int = DEFAULT_PRIME

    def __post_init__(self):
        if self.p < 3 or not isprime(self.p):
            raise ValueError(f"hash modulus {self.p} is not an odd prime")

    @property
    def l_p(self) -> int:
        """Chunk length floor(log2 p)."""
        return self.p.bit_length() - 1

    @property
    def l_ht(self) -> int:
        """Tag length ceil(log2 p); p is an odd prime so never a power of two."""
        return self.p.bit_length()


def chunk_values(bits, l_p: int) -> list[int]:
    """Split into ``l_p``-bit big-endian chunks, zero-padding the last one on the right."""
    bits = np.asarray(bits, dtype=np.uint8)
    n = -(-bits.size // l_p)
    padded = np.zeros(n * l_p, dtype=np.uint64)
    padded[:bits.size] = bits
    blocks = padded.reshape(n, l_p)
    if l_p <= 63:
        weights = np.left_shift(np.uint64(1), np.arange(l_p - 1, -1, -1, dtype=np.uint64))
        return [int(v) for v in blocks @ weights]
    return [int("".join(map(str, row.astype(np.uint8).tolist())), 2) for row in blocks]


def poly_hash(bits, key: int, params: FieldParams = FieldParams()) -> int:
    """Sum of chunk_i * key**(i-1) mod p, with chunk_1 the leading chunk."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size == 0:
        raise ValueError("cannot hash an empty string")
    if not 0 <= key < params.p:
        raise ValueError("hash key outside [0, p)")
    acc = 0
    for x in reversed(chunk_values(bits, params.l_p)):
        acc = (acc * key + x) % params.p
    return acc


def poly_hash_many(bits: np.ndarray, keys: np.ndarray, params: FieldParams) -> np.ndarray:
    """Vectorised :func:`poly_hash` for a batch of equal-length strings (needs p < 2**31)."""
    if params.p >= 2**31:
        raise ValueError("batched hashing is limited to p < 2**31")
    bits = np.asarray(bits, dtype=np.uint8)
    rows, length = bits.shape
    l_p = params.l_p
    n = -(-length // l_p)
    padded = np.zeros((rows, n * l_p), dtype=np.int64)
    padded[:, :length] = bits
    weights = 1 << np.arange(l_p - 1, -1, -1, dtype=np.int64)
    chunks = padded.reshape(rows, n, l_p) @ weights
    keys = np.asarray(keys, dtype=np.int64)
    acc = np.zeros(rows, dtype=np.int64)
    for i in range(n - 1, -1, -1):
        acc = (acc * keys + chunks[:, i]) % params.p
    return acc


def collision_bound_exact(length: int, params: FieldParams = FieldParams()) -> Fraction:
    if length < 1:
        raise ValueError("length must be positive")
    return Fraction(math.ceil(length / params.l_p) - 1, params.p)


def collision_bound(length: int, params: FieldParams = FieldParams()) -> float:
    """Collision probability bound (ceil(l / l_p) - 1) / p for strings of ``length`` bits."""
    return float(collision_bound_exact(length, params))


def verification_fail_bound(n_b: int, n_sb: int, n_subblocks: int, params: FieldParams = FieldParams()) -> float:
    """Worst-case probability that some erroneous sub-block survives verification."""
    if n_b != n_subblocks * n_sb:
        raise ValueError(f"n_b={n_b} is not {n_subblocks} x {n_sb}")
    eb = collision_bound_exact(n_b, params)
    esb = collision_bound_exact(n_sb, params)
    return float(eb + (1 - eb) * (1 - (1 - esb) ** n_subblocks))


def expected_leakage(fer: float, n_subblocks: int, l_ht: int) -> float:
    """Expected verification leakage in bits for sub-block frame error rate ``fer``."""
    if not 0.0 <= fer <= 1.0:
        raise ValueError("frame error rate must lie in [0, 1]")
    clean = (1.0 - fer) ** n_subblocks
    return clean * l_ht + (1.0 - clean) * (n_subblocks + 1) * l_ht


class HashKeySource:
    """Uniform hash keys in [0, p).

    Seeded instances expand the seed with SHA-256 in counter mode so runs are
    reproducible; ``seed=None`` draws from the operating system instead.
    """

    def __init__(self, seed: int | bytes | None = None):
        if isinstance(seed, int):
            seed = seed.to_bytes(max(1, (seed.bit_length() + 7) // 8), "big")
        self._seed = seed
        self._counter = 0

    def draw(self, p: int) -> int:
        if self._seed is None:
            return secrets.randbelow(p)
        nbits = p.bit_length()
        nbytes = (nbits + 7) // 8
        while True:
            block = hashlib.sha256(self._seed + self._counter.to_bytes(8, "big")).digest()
            self._counter += 1
            value = int.from_bytes(block[:nbytes], "big") >> (8 * nbytes - nbits)
            if value < p:
                return value


@dataclass(eq=False)
class VerificationOutcome:
    verified_key: np.ndarray
    kept: list[int]
    discarded: list[int]
    hash_bits: int
    ack: bool


@dataclass(eq=False)
class _Verifier:
    subblocks: Sequence[np.ndarray]
    params: FieldParams = field(default_factory=FieldParams)
    phase: str = "ready"
    outcome: VerificationOutcome | None = None
    hash_bits: int = 0

    def __post_init__(self):
        self.subblocks = [np.asarray(s, dtype=np.uint8) for s in self.subblocks]
        if not self.subblocks:
            raise ValueError("nothing to verify")
        self.block = np.concatenate(self.subblocks)

    @property
    def done(self) -> bool:
        return self.outcome is not None

    def _expect(self, msg: ProtocolMessage, phase: str, *tags: Tag) -> None:
        if self.phase != phase or msg.tag not in tags:
            raise ProtocolError(f"unexpected {msg.tag.name} in verification phase {self.phase!r}")

    def _finish(self, discarded: Sequence[int], ack: bool) -> None:
        bad = set(discarded)
        kept = [i for i in range(len(self.subblocks)) if i not in bad]
        key = np.concatenate([self.subblocks[i] for i in kept]) if kept else np.empty(0, dtype=np.uint8)
        self.outcome = VerificationOutcome(key, kept, sorted(bad), self.hash_bits, ack)
        self.phase = "done"


class AliceVerifier(_Verifier):
    """Sends the block hash, and on NACK one hash per sub-block."""

    def __init__(self, subblocks, params: FieldParams = FieldParams(), keys: HashKeySource | None = None):
        super().__init__(subblocks, params)
        self.keys = keys or HashKeySource()

    def start(self) -> ProtocolMessage:
        if self.phase != "ready":
            raise ProtocolError("verification already started")
        k = self.keys.draw(self.params.p)
        tag = poly_hash(self.block, k, self.params)
        self.hash_bits += self.params.l_ht
        self.phase = "await_ack"
        return ProtocolMessage(Tag.HASH_BLOCK, None, pack_key_tag_pairs([(k, tag)], self.params.l_ht))

    def receive(self, msg: ProtocolMessage) -> ProtocolMessage | None:
        if self.phase == "await_ack":
            self._expect(msg, "await_ack", Tag.ACK, Tag.NACK)
            if msg.tag is Tag.ACK:
                self._finish([], ack=True)
                return None
            pairs = []
            for sb in self.subblocks:
                k = self.keys.draw(self.params.p)
                pairs.append((k, poly_hash(sb, k, self.params)))
            self.hash_bits += len(pairs) * self.params.l_ht
            self.phase = "await_bad"
            return ProtocolMessage(Tag.HASH_SUBBLOCKS, None, pack_key_tag_pairs(pairs, self.params.l_ht))
        self._expect(msg, "await_bad", Tag.BAD_INDICES)
        bad = unpack_indices(msg.payload)
        if any(not 0 <= i < len(self.subblocks) for i in bad):
            raise ProtocolError("discard list names a sub-block that does not exist")
        self._finish(bad, ack=False)
        return None


class BobVerifier(_Verifier):
    """Checks Alice's hashes against his own block and reports mismatches."""

    def receive(self, msg: ProtocolMessage) -> ProtocolMessage | None:
        if self.phase == "ready":
            self._expect(msg, "ready", Tag.HASH_BLOCK)
            ((k, tag),) = unpack_key_tag_pairs(msg.payload, 1, self.params.l_ht)
            self.hash_bits += self.params.l_ht
            if poly_hash(self.block, k, self.params) == tag:
                self._finish([], ack=True)
                return ProtocolMessage(Tag.ACK)
            self.phase = "await_subhashes"
            return ProtocolMessage(Tag.NACK)
        self._expect(msg, "await_subhashes", Tag.HASH_SUBBLOCKS)
        pairs = unpack_key_tag_pairs(msg.payload, len(self.subblocks), self.params.l_ht)
        self.hash_bits += len(pairs) * self.params.l_ht
        bad = [i for i, (sb, (k, tag)) in enumerate(zip(self.subblocks, pairs)) if poly_hash(sb, k, self.params) != tag]
        self._finish(bad, ack=False)
        return ProtocolMessage(Tag.BAD_INDICES, None, pack_indices(bad))
