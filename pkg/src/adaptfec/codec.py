"""Streaming encoder and decoder built on diagonal interleaving.

For a block code with ``k`` message and ``n`` codeword positions, packet ``t``
carries symbol ``j`` of the codeword whose diagonal starts at ``t - j``. A
frame is split into ``k`` lanes (lane ``j`` holds bytes ``j, j+k, ...``,
zero-padded) and lane ``j`` of frame ``t`` is message symbol ``j`` of
diagonal ``t - j``. The parity attached to packet ``t`` is positions
``k..n-1`` of diagonals ``t-k, ..., t-n+1``. Because the block code recovers
symbol ``j`` from positions up to ``j + T``, every frame is recovered by packet
``seq + T`` whenever the loss pattern is one the code handles.

Diagonals never share unknowns, so recovering a frame reduces to one small
GF(256) system per lane.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import gf256
from .blockcode import BlockCode, CodeParams, construct_code
from .wire import ChannelPacket

log = logging.getLogger(__name__)

LOST = None


def lanes(frame: np.ndarray, k: int) -> np.ndarray:
    """Split a frame into ``k`` zero-padded lanes, shape ``(k, ceil(len/k))``."""
    w = -(-len(frame) // k)
    buf = np.zeros(w * k, dtype=np.uint8)
    buf[: len(frame)] = frame
    return buf.reshape(w, k).T


def unlanes(lanes_: np.ndarray, size: int) -> bytes:
    return lanes_.T.reshape(-1)[:size].tobytes()


def parity_size(payload_len: int, params: CodeParams) -> int:
    if params.is_uncoded:
        return 0
    return -(-payload_len // params.k) * (params.n - params.k)


# -- transition schedule ---------------------------------------------------------


@dataclass(frozen=True)
class PacketCodes:
    """Parity carried by one packet: the primary field and an optional second field."""

    primary: CodeParams
    secondary: CodeParams | None = None

    def coded(self) -> list[CodeParams]:
        out = [] if self.primary.is_uncoded else [self.primary]
        if self.secondary is not None:
            out.append(self.secondary)
        return out


class CodeSchedule:
    """Decides which code(s) protect each outgoing packet.

    ``request(new)`` at the moment packet ``i`` is next starts a transition:
    packets ``i..i+T`` carry both the old and new parity and packet ``i+T+1``
    onward carries only the new one. Frames up to ``i`` are then fully covered
    by the old code and frames from ``i`` on by the new code. A different
    request while one is pending replaces it (the latest estimate wins) and
    restarts the window; requesting the active code cancels it.
    """

    def __init__(self, T: int, initial: CodeParams | None = None) -> None:
        self.T = T
        self.active = initial if initial is not None else CodeParams.uncoded(T)
        if self.active.T != T:
            raise ValueError("initial code has a different delay")
        self.target: CodeParams | None = None
        self.activation: int | None = None
        self.seq = 0

    def request(self, params: CodeParams) -> None:
        if params.T != self.T:
            raise ValueError(f"requested {params} on a delay-{self.T} stream")
        if self.target is not None and self.seq >= self.activation:
            self._activate()
        if params == self.active:
            self.target = self.activation = None
        elif params != self.target:
            self.target = params
            self.activation = self.seq + self.T + 1

    def _activate(self) -> None:
        self.active = self.target
        self.target = self.activation = None

    @property
    def pending(self) -> tuple[CodeParams, int] | None:
        return None if self.target is None else (self.target, self.activation)

    def next(self) -> PacketCodes:
        """Codes for packet ``self.seq``; advances the sequence number."""
        if self.target is not None and self.seq >= self.activation:
            self._activate()
        self.seq += 1
        old, new = self.active, self.target
        if new is None or new.is_uncoded:
            return PacketCodes(old)
        if old.is_uncoded:
            return PacketCodes(new)
        return PacketCodes(old, new)


# -- encoder ---------------------------------------------------------------------


class StreamEncoder:
    """Source side: frames in, :class:`ChannelPacket` out.

    All frames of a stream must have the same length; parity lanes of one
    code combine frames across T packets.
    """

    def __init__(self, T: int, initial: CodeParams | None = None) -> None:
        self.T = T
        self.schedule = CodeSchedule(T, initial)
        self.history: deque[np.ndarray] = deque(maxlen=T)
        self.frame_size: int | None = None

    @property
    def seq(self) -> int:
        return self.schedule.seq

    def request(self, params: CodeParams) -> None:
        self.schedule.request(params)

    def parity(self, params: CodeParams, frame: np.ndarray) -> bytes:
        """Parity of ``params`` for the packet that carries ``frame``."""
        if params.is_uncoded:
            return b""
        code = construct_code(params)
        k, n = params.k, params.n
        w = -(-len(frame) // k)
        hist = list(self.history)  # hist[-1] is the previous frame
        zero = np.zeros(len(frame), dtype=np.uint8)
        lane_cache: dict[int, np.ndarray] = {}

        def lanes_back(back: int) -> np.ndarray:
            # lanes of frame t - back
            if back not in lane_cache:
                f = hist[-back] if back <= len(hist) else zero
                lane_cache[back] = lanes(f, k)
            return lane_cache[back]

        out = np.zeros((n - k, w), dtype=np.uint8)
        gen = code.generator
        for p in range(k, n):
            acc = out[p - k]
            for j in range(k):
                c = int(gen[j, p])
                if c:
                    acc ^= gf256.MUL_TABLE[c][lanes_back(p - j)[j]]
        return out.tobytes()

    def encode(self, payload: bytes) -> ChannelPacket:
        if self.frame_size is None:
            self.frame_size = len(payload)
        elif len(payload) != self.frame_size:
            raise ValueError(f"frame of {len(payload)} bytes in a {self.frame_size}-byte stream")
        seq = self.schedule.seq
        codes = self.schedule.next()
        frame = np.frombuffer(payload, dtype=np.uint8)
        parity = self.parity(codes.primary, frame)
        parity2 = b"" if codes.secondary is None else self.parity(codes.secondary, frame)
        self.history.append(frame)
        return ChannelPacket(seq, codes.primary, bytes(payload), parity, codes.secondary, parity2)


# -- recoverability ----------------------------------------------------------------


def frame_recoverable(
    s: int,
    code: BlockCode,
    frame_known: Callable[[int], bool],
    parity_known: Callable[[int], bool],
) -> bool:
    """Whether every lane of erased frame ``s`` is determined under ``code``.

    ``frame_known(f)`` says whether frame ``f`` arrived (frames before zero are
    known zeros); ``parity_known(t)`` says whether packet ``t`` arrived carrying
    this code's parity. Only packets up to ``s + T`` are consulted.
    """
    k, n = code.k, code.n
    horizon = s + code.params.T
    for j in range(k):
        d = s - j
        mask = 0
        for i in range(k):
            f = d + i
            if f >= 0 and not frame_known(f):
                mask |= 1 << i
        for p in range(k, n):
            t = d + p
            if t > horizon or t < 0 or not parity_known(t):
                mask |= 1 << p
        if not code.symbol_recoverable(j, mask):
            return False
    return True


def simulate_recovery(
    erased: np.ndarray,
    codes: list[PacketCodes],
    T: int,
) -> np.ndarray:
    """Frame-level decoder outcome from an erasure mask and per-packet codes.

    Returns a boolean array, True where the frame is delivered (received or
    recovered by its deadline). Mirrors :class:`StreamDecoder` exactly, which
    is checked by tests, but never touches bytes.
    """
    total = len(erased)
    erased = np.asarray(erased, dtype=bool)
    delivered = ~erased
    carried = [set(pc.coded()) for pc in codes]

    def frame_known(f: int) -> bool:
        return f < total and not erased[f]

    for s in np.nonzero(erased)[0]:
        s = int(s)
        cands = set()
        for t in range(s + 1, min(s + T, total - 1) + 1):
            if not erased[t]:
                cands |= carried[t]
        for params in sorted(cands):
            code = construct_code(params)

            def parity_known(t: int, c=params) -> bool:
                return t < total and not erased[t] and c in carried[t]

            if frame_recoverable(s, code, frame_known, parity_known):
                delivered[s] = True
                break
    return delivered


# -- decoder ---------------------------------------------------------------------


class StreamDecoder:
    """Destination side: packets (or erasure marks) in, frames out in seq order.

    ``push`` returns ``(seq, payload)`` pairs as frames are finalized, with
    ``payload`` equal to :data:`LOST` (``None``) for frames not recovered by
    their deadline. Erased frames are recovered as early as the received
    parity allows. ``finish`` flushes the tail as if nothing more arrives.
    """

    def __init__(self, T: int) -> None:
        self.T = T
        self.frames: dict[int, np.ndarray] = {}
        self.packets: dict[int, ChannelPacket] = {}
        self.next_seq = 0  # next arrival slot
        self.cursor = 0  # next frame to emit
        self.frame_size: int | None = None
        self._closed = False

    def push(self, seq: int, packet: ChannelPacket | None = None) -> list[tuple[int, bytes | None]]:
        """Record arrival of ``packet`` at ``seq`` (``None`` marks an erasure).

        Slots skipped between calls are marked erased; a ``seq`` already
        passed is ignored (late packets count as lost).
        """
        if self._closed:
            raise RuntimeError("decoder already finished")
        if seq < self.next_seq:
            return []
        if packet is not None:
            if packet.seq != seq:
                raise ValueError("packet seq does not match its slot")
            if packet.params.T != self.T:
                log.warning("dropping packet %d with delay %d", seq, packet.params.T)
                packet = None
            elif self.frame_size is None:
                self.frame_size = len(packet.payload)
            elif len(packet.payload) != self.frame_size:
                log.warning("dropping packet %d with payload length %d", seq, len(packet.payload))
                packet = None
        out = []
        while self.next_seq < seq:  # each skipped slot passes its own deadline
            self.next_seq += 1
            out += self._drain(final=False)
        if packet is not None:
            self.packets[seq] = packet
            self.frames[seq] = np.frombuffer(packet.payload, dtype=np.uint8)
        self.next_seq = seq + 1
        return out + self._drain(final=False)

    def finish(self) -> list[tuple[int, bytes | None]]:
        self._closed = True
        return self._drain(final=True)

    def _drain(self, final: bool) -> list[tuple[int, bytes | None]]:
        out = []
        latest = self.next_seq - 1
        while self.cursor <= latest:
            s = self.cursor
            if s in self.frames:
                data = self.frames[s].tobytes()
            else:
                data = self._recover(s)
                if data is None and not final and latest < s + self.T:
                    break
            assert final or latest <= s + self.T, "frame emitted past its deadline"
            out.append((s, data))
            self.cursor += 1
        self._prune()
        return out

    def _prune(self) -> None:
        low = self.cursor - self.T - 1
        for d in (self.frames, self.packets):
            for s in [s for s in d if s < low]:
                del d[s]

    def _recover(self, s: int) -> bytes | None:
        if self.frame_size is None:
            return None
        horizon = min(s + self.T, self.next_seq - 1)
        cands = set()
        for t in range(s + 1, horizon + 1):
            if t in self.packets:
                cands.update(self.packets[t].codes())
        for params in sorted(cands):
            got = self._recover_with(s, construct_code(params), horizon)
            if got is not None:
                return got
        return None

    def _recover_with(self, s: int, code: BlockCode, horizon: int) -> bytes | None:
        k, n = code.k, code.n
        size = self.frame_size
        w = -(-size // k)
        gen = code.generator
        out = np.zeros((k, w), dtype=np.uint8)
        for j in range(k):
            d = s - j
            unknown = []
            known_lanes = {}
            for i in range(k):
                f = d + i
                if f < 0:
                    continue
                if f in self.frames:
                    known_lanes[i] = lanes(self.frames[f], k)[i]
                else:
                    unknown.append(i)
            rows, rhs = [], []
            for p in range(k, n):
                t = d + p
                if t < 0 or t > horizon or t not in self.packets:
                    continue
                par = self.packets[t].parity_for(code.params)
                if par is None:
                    continue
                r = np.frombuffer(par, dtype=np.uint8).reshape(n - k, w)[p - k].copy()
                for i, lane in known_lanes.items():
                    c = int(gen[i, p])
                    if c:
                        r ^= gf256.MUL_TABLE[c][lane]
                rows.append([int(gen[i, p]) for i in unknown])
                rhs.append(r)
            if not rows:
                return None
            try:
                sol = gf256.solve(np.array(rows, dtype=np.uint8), np.array(rhs))
            except gf256.InconsistentSystemError:
                log.warning("inconsistent parity for frame %d under %s", s, code.params)
                return None
            idx = unknown.index(j)
            if not sol.determined[idx]:
                return None
            out[j] = sol.x[idx]
        return unlanes(out, size)


def run_stream(
    frames: Iterable[bytes],
    erased: Iterable[bool],
    T: int,
    params: CodeParams,
) -> list[tuple[int, bytes | None]]:
    """Encode ``frames`` with a fixed code, drop erased packets, and decode."""
    enc = StreamEncoder(T, params)
    dec = StreamDecoder(T)
    out = []
    for payload, lost in zip(frames, erased):
        pkt = enc.encode(payload)
        out += dec.push(pkt.seq, None if lost else pkt)
    out += dec.finish()
    return out
