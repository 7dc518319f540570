"""Datagram layout for FEC packets and feedback.

All integers are big-endian. A channel packet is::

    C5 01 flags seq:u32 T B N payload_len:u16 payload parity_len:u16 parity
    [B2 N2 parity2_len:u16 parity2]      # present iff flags & 0x01

and a feedback packet is the fixed 9 bytes ``C5 01 FB ack_seq:u32 B N``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction

from .blockcode import CodeParams

MAGIC = 0xC5
VERSION = 0x01
FEEDBACK_TYPE = 0xFB
FLAG_DUAL = 0x01

#: Largest UDP payload over IPv4. Low-rate codes on 300-byte frames need more
#: than one Ethernet MTU, so the only hard limit is the datagram size.
MAX_DATAGRAM = 65507
#: Datagrams up to this size fit one Ethernet frame unfragmented.
ETHERNET_SAFE = 1472

_HEAD = struct.Struct(">BBBIBBBH")
_FEEDBACK = struct.Struct(">BBBIBB")


class WireError(ValueError):
    """Malformed datagram."""


@dataclass(frozen=True)
class ChannelPacket:
    seq: int
    params: CodeParams
    payload: bytes
    parity: bytes = b""
    params2: CodeParams | None = None
    parity2: bytes = b""

    @property
    def dual(self) -> bool:
        return self.params2 is not None

    @property
    def size(self) -> int:
        """Bytes of FEC content: payload plus every parity field."""
        return len(self.payload) + len(self.parity) + len(self.parity2)

    @property
    def rate(self) -> Fraction:
        return Fraction(len(self.payload), self.size) if self.size else Fraction(1)

    def codes(self) -> list[CodeParams]:
        """Coded parameter sets whose parity this packet carries."""
        out = [] if self.params.is_uncoded else [self.params]
        if self.params2 is not None and not self.params2.is_uncoded:
            out.append(self.params2)
        return out

    def parity_for(self, params: CodeParams) -> bytes | None:
        if params == self.params:
            return self.parity
        if params == self.params2:
            return self.parity2
        return None


@dataclass(frozen=True)
class FeedbackPacket:
    ack_seq: int
    B: int
    N: int


def _u16(n: int, what: str) -> int:
    if n > 0xFFFF:
        raise WireError(f"{what} of {n} bytes exceeds the 16-bit length field")
    return n


def encode_packet(pkt: ChannelPacket) -> bytes:
    p = pkt.params
    head = _HEAD.pack(
        MAGIC,
        VERSION,
        FLAG_DUAL if pkt.dual else 0,
        pkt.seq,
        p.T,
        p.B,
        p.N,
        _u16(len(pkt.payload), "payload"),
    )
    parts = [head, pkt.payload, struct.pack(">H", _u16(len(pkt.parity), "parity")), pkt.parity]
    if pkt.dual:
        q = pkt.params2
        parts += [struct.pack(">BBH", q.B, q.N, _u16(len(pkt.parity2), "parity2")), pkt.parity2]
    out = b"".join(parts)
    if len(out) > MAX_DATAGRAM:
        raise WireError(f"packet of {len(out)} bytes exceeds the datagram limit")
    return out


def _params(T: int, B: int, N: int) -> CodeParams:
    try:
        return CodeParams(T, B, N)
    except ValueError as exc:
        raise WireError(str(exc)) from None


def decode_packet(data: bytes) -> ChannelPacket:
    if len(data) < _HEAD.size:
        raise WireError(f"short datagram ({len(data)} bytes)")
    magic, version, flags, seq, T, B, N, plen = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise WireError(f"bad magic 0x{magic:02X}")
    if version != VERSION:
        raise WireError(f"unsupported version {version}")
    if flags == FEEDBACK_TYPE:
        raise WireError("feedback packet on the data path")
    if flags & ~FLAG_DUAL:
        raise WireError(f"unknown flags 0x{flags:02X}")
    pos = _HEAD.size

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise WireError("length field exceeds datagram")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    payload = take(plen)
    (qlen,) = struct.unpack(">H", take(2))
    parity = take(qlen)
    params2 = None
    parity2 = b""
    if flags & FLAG_DUAL:
        B2, N2, q2len = struct.unpack(">BBH", take(4))
        params2 = _params(T, B2, N2)
        parity2 = take(q2len)
    if pos != len(data):
        raise WireError(f"{len(data) - pos} trailing bytes")
    return ChannelPacket(seq, _params(T, B, N), payload, parity, params2, parity2)


def encode_feedback(fb: FeedbackPacket) -> bytes:
    return _FEEDBACK.pack(MAGIC, VERSION, FEEDBACK_TYPE, fb.ack_seq, fb.B, fb.N)


def decode_feedback(data: bytes) -> FeedbackPacket:
    if len(data) != _FEEDBACK.size:
        raise WireError(f"feedback must be {_FEEDBACK.size} bytes, got {len(data)}")
    magic, version, kind, ack, B, N = _FEEDBACK.unpack(data)
    if magic != MAGIC or version != VERSION or kind != FEEDBACK_TYPE:
        raise WireError("not a feedback packet")
    return FeedbackPacket(ack, B, N)
