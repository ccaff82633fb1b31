"""Protocol messages and their byte framing.

Frame layout: 1-octet tag, 4-octet big-endian payload length (octets),
2-octet big-endian sub-block id (0xFFFF when absent), then the payload.
Bit strings are packed MSB-first and zero-padded to an octet boundary.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

NO_SUBBLOCK = 0xFFFF
_HEADER = struct.Struct(">BIH")


class Tag(enum.IntEnum):
    SYNDROME = 0x01
    DISCLOSE = 0x02
    HASH_BLOCK = 0x03
    ACK = 0x04
    NACK = 0x05
    HASH_SUBBLOCKS = 0x06
    BAD_INDICES = 0x07


class DecodeError(ValueError):
    """Frame cannot be parsed."""


class ProtocolError(RuntimeError):
    """A party received a message it did not expect in its current phase."""


def pack_bits(bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def unpack_bits(data: bytes, n_bits: int) -> np.ndarray:
    if len(data) != (n_bits + 7) // 8:
        raise DecodeError(f"{len(data)} octets cannot hold exactly {n_bits} bits")
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=n_bits)


def int_to_bits(value: int, width: int) -> np.ndarray:
    """Big-endian ``width``-bit representation of a non-negative integer."""
    if not 0 <= value < 1 << width:
        raise ValueError(f"{value} does not fit in {width} bits")
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_int(bits) -> int:
    out = 0
    for b in np.asarray(bits, dtype=np.uint8).tolist():
        out = (out << 1) | b
    return out


@dataclass(frozen=True)
class ProtocolMessage:
    tag: Tag
    sub_block_id: int | None = None
    payload: bytes = b""

    def bits(self, n_bits: int) -> np.ndarray:
        return unpack_bits(self.payload, n_bits)

    @classmethod
    def with_bits(cls, tag: Tag, bits, sub_block_id: int | None = None) -> "ProtocolMessage":
        return cls(tag, sub_block_id, pack_bits(bits))


def encode_message(msg: ProtocolMessage) -> bytes:
    sid = NO_SUBBLOCK if msg.sub_block_id is None else msg.sub_block_id
    if msg.sub_block_id is not None and not 0 <= sid < NO_SUBBLOCK:
        raise ValueError(f"sub-block id {sid} not encodable")
    return _HEADER.pack(int(msg.tag), len(msg.payload), sid) + bytes(msg.payload)


def decode_message(data: bytes) -> ProtocolMessage:
    if len(data) < _HEADER.size:
        raise DecodeError(f"truncated header: {len(data)} octets")
    tag, length, sid = _HEADER.unpack_from(data)
    try:
        tag = Tag(tag)
    except ValueError:
        raise DecodeError(f"unknown tag 0x{tag:02x}") from None
    payload = data[_HEADER.size:]
    if len(payload) != length:
        raise DecodeError(f"payload length field {length} but {len(payload)} octets follow")
    return ProtocolMessage(tag, None if sid == NO_SUBBLOCK else sid, bytes(payload))


def pack_key_tag_pairs(pairs: Sequence[tuple[int, int]], width: int) -> bytes:
    """Concatenate ``(key, tag)`` pairs as ``width``-bit big-endian fields."""
    bits = [int_to_bits(v, width) for pair in pairs for v in pair]
    return pack_bits(np.concatenate(bits)) if bits else b""


def unpack_key_tag_pairs(data: bytes, count: int, width: int) -> list[tuple[int, int]]:
    bits = unpack_bits(data, 2 * count * width).reshape(count, 2, width)
    return [(bits_to_int(k), bits_to_int(t)) for k, t in bits]


def pack_indices(indices: Sequence[int]) -> bytes:
    if len(indices) > 0xFFFF:
        raise ValueError("too many indices for a 2-octet count")
    return struct.pack(f">H{len(indices)}H", len(indices), *indices)


def unpack_indices(data: bytes) -> list[int]:
    if len(data) < 2:
        raise DecodeError("BAD_INDICES payload shorter than its count field")
    (count,) = struct.unpack_from(">H", data)
    if len(data) != 2 + 2 * count:
        raise DecodeError(f"BAD_INDICES count {count} does not match {len(data)} octets")
    return list(struct.unpack_from(f">{count}H", data, 2))
