"""UDP source and destination loops.

The source sends one :class:`~adaptfec.wire.ChannelPacket` per tick and applies
the newest feedback it has seen before encoding each frame. The destination
decodes, runs the estimator on every accepted packet and answers with a
:class:`~adaptfec.wire.FeedbackPacket`.

With ``tick_ms == 0`` both sides run in lockstep: the source waits for one
reply per packet and the destination replies to every datagram, repeating
its last feedback for packets the drop oracle discards. Feedback then
reaches the source exactly one channel use later, as in the simulator, so a
loopback run reproduces the simulator frame for frame.
"""

from __future__ import annotations

import logging
import socket
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .blockcode import CodeParams
from .codec import StreamDecoder, StreamEncoder
from .estimator import InterleavedEstimator
from .wire import (
    FeedbackPacket,
    WireError,
    decode_feedback,
    decode_packet,
    encode_feedback,
    encode_packet,
)

log = logging.getLogger(__name__)

RECV_BUF = 65536
DEFAULT_FRAME_BYTES = 300


def parse_addr(text: str, default_host: str = "127.0.0.1") -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep:
        host, port = default_host, text
    try:
        return host or default_host, int(port)
    except ValueError:
        raise ValueError(f"bad address {text!r}, expected host:port") from None


def frames_from_bytes(data: bytes, frame_bytes: int = DEFAULT_FRAME_BYTES) -> list[bytes]:
    """Cut ``data`` into fixed-size frames; the last one is zero-padded."""
    out = [data[i : i + frame_bytes] for i in range(0, len(data), frame_bytes)]
    if out and len(out[-1]) < frame_bytes:
        out[-1] = out[-1].ljust(frame_bytes, b"\0")
    return out


def random_frames(count: int, frame_bytes: int = DEFAULT_FRAME_BYTES, seed: int = 0) -> Iterator[bytes]:
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield rng.integers(0, 256, frame_bytes, dtype=np.uint8).tobytes()


@dataclass
class SenderStats:
    sent: int = 0
    feedback: int = 0
    payload_bytes: int = 0
    wire_bytes: int = 0


class FeedbackInbox:
    """Newest-ack-wins view of feedback datagrams on the source socket."""

    def __init__(self, T: int) -> None:
        self.T = T
        self.ack = -1
        self.latest: CodeParams | None = None

    def offer(self, data: bytes) -> bool:
        try:
            fb = decode_feedback(data)
        except WireError as exc:
            log.debug("ignoring datagram on feedback path: %s", exc)
            return False
        if fb.ack_seq <= self.ack:
            return False
        try:
            params = CodeParams(self.T, fb.B, fb.N)
        except ValueError:
            log.warning("ignoring invalid feedback (%d, %d)", fb.B, fb.N)
            return False
        self.ack = fb.ack_seq
        self.latest = params
        return True


def run_sender(
    frames: Iterable[bytes],
    peer: tuple[str, int],
    T: int = 10,
    tick_ms: float = 10.0,
    reply_timeout: float = 5.0,
    sock: socket.socket | None = None,
) -> SenderStats:
    own = sock is None
    if own:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    enc = StreamEncoder(T)
    inbox = FeedbackInbox(T)
    stats = SenderStats()
    lockstep = tick_ms <= 0
    tick = tick_ms / 1000.0
    next_send = time.monotonic()

    def drain() -> None:
        sock.setblocking(False)
        try:
            while True:
                try:
                    data = sock.recv(RECV_BUF)
                except (BlockingIOError, InterruptedError):
                    return
                except ConnectionRefusedError:
                    continue
                stats.feedback += inbox.offer(data)
        finally:
            sock.setblocking(True)

    try:
        for payload in frames:
            if not lockstep:
                delay = next_send - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                next_send += tick
            drain()
            if inbox.latest is not None:
                enc.request(inbox.latest)
            pkt = enc.encode(payload)
            data = encode_packet(pkt)
            try:
                sock.sendto(data, peer)
            except OSError as exc:
                log.warning("send of packet %d failed: %s", pkt.seq, exc)
            stats.sent += 1
            stats.payload_bytes += len(pkt.payload)
            stats.wire_bytes += len(data)
            if lockstep:
                sock.settimeout(reply_timeout)
                try:
                    stats.feedback += inbox.offer(sock.recv(RECV_BUF))
                except (socket.timeout, ConnectionRefusedError):
                    log.warning("no reply to packet %d", pkt.seq)
                finally:
                    sock.settimeout(None)
    finally:
        if own:
            sock.close()
    return stats


@dataclass
class ReceiverResult:
    frames: dict[int, bytes | None] = field(default_factory=dict)
    frame_size: int | None = None
    received: int = 0
    dropped: int = 0
    malformed: int = 0
    late: int = 0

    def lost(self, count: int | None = None) -> list[int]:
        n = count if count is not None else len(self.frames)
        return [s for s in range(n) if self.frames.get(s) is None]

    def stream(self, count: int | None = None) -> bytes:
        """Recovered bytes in seq order, lost frames as zeros."""
        n = count if count is not None else len(self.frames)
        size = self.frame_size or 0
        zero = bytes(size)
        return b"".join(self.frames.get(s) or zero for s in range(n))


def run_receiver(
    sock: socket.socket,
    T: int = 10,
    L: int = 1000,
    drop_trace=None,
    frames: int | None = None,
    idle_timeout: float = 2.0,
    tick_ms: float = 0.0,
) -> ReceiverResult:
    """Receive until ``frames`` uses are accounted for or the link goes idle."""
    dec = StreamDecoder(T)
    est = InterleavedEstimator(T, L)
    res = ReceiverResult()
    drop = None if drop_trace is None else np.asarray(drop_trace, dtype=bool)
    last_feedback: bytes | None = None
    highest = -1
    last_arrival = time.monotonic()
    tick = tick_ms / 1000.0
    sock.settimeout(min(idle_timeout, tick) if tick > 0 else idle_timeout)

    def reply(addr) -> None:
        # lockstep senders wait for an answer to every datagram
        sock.sendto(last_feedback or encode_feedback(FeedbackPacket(0, 0, 0)), addr)

    def emit(items) -> None:
        for s, data in items:
            res.frames[s] = data

    while frames is None or dec.next_seq < frames:
        try:
            data, addr = sock.recvfrom(RECV_BUF)
        except socket.timeout:
            now = time.monotonic()
            if now - last_arrival >= idle_timeout:
                break
            if tick > 0 and highest >= 0:
                # deadline sweep: uses that should have arrived by now, with two ticks of slack
                due = highest + int((now - last_arrival) / tick) - 2
                if frames is not None:
                    due = min(due, frames - 1)
                if due > dec.next_seq - 1:
                    emit(dec.push(due, None))
            continue
        last_arrival = time.monotonic()
        try:
            pkt = decode_packet(data)
        except WireError as exc:
            res.malformed += 1
            log.debug("malformed datagram: %s", exc)
            reply(addr)
            continue
        seq = pkt.seq
        if drop is not None and seq < len(drop) and drop[seq]:
            res.dropped += 1
            if seq >= dec.next_seq:
                emit(dec.push(seq, None))
            reply(addr)
            continue
        if seq <= highest or seq < dec.next_seq:
            res.late += 1
            reply(addr)
            continue
        res.received += 1
        highest = seq
        emit(dec.push(seq, pkt))
        B, N = est.on_receipt(seq)
        last_feedback = encode_feedback(FeedbackPacket(seq, B, N))
        sock.sendto(last_feedback, addr)
    if frames is not None and dec.next_seq < frames:
        emit(dec.push(frames - 1, None))
    emit(dec.finish())
    res.frame_size = dec.frame_size
    return res
