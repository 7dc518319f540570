import socket
import threading
import time

import numpy as np
import pytest

from adaptfec import channel, harness, transport
from adaptfec.blockcode import CodeParams
from adaptfec.codec import StreamEncoder
from adaptfec.wire import FeedbackPacket, decode_feedback, encode_feedback, encode_packet


def udp():
    s = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    s.bind(("127.0.0.1", 0))
    return s


def start_receiver(**kw):
    sock = udp()
    box = {}

    def run():
        box["res"] = transport.run_receiver(sock, **kw)
        sock.close()

    th = threading.Thread(target=run, daemon=True)
    th.start()
    return sock.getsockname(), th, box


def loopback(frames, T=10, L=1000, drop=None, tick_ms=0.0):
    addr, th, box = start_receiver(T=T, L=L, drop_trace=drop, frames=len(frames), idle_timeout=5.0, tick_ms=tick_ms)
    stats = transport.run_sender(frames, addr, T=T, tick_ms=tick_ms, reply_timeout=5.0)
    th.join(30)
    assert not th.is_alive()
    return stats, box["res"]


def test_parse_addr():
    assert transport.parse_addr("10.0.0.1:9000") == ("10.0.0.1", 9000)
    assert transport.parse_addr("9000") == ("127.0.0.1", 9000)
    assert transport.parse_addr(":9000") == ("127.0.0.1", 9000)
    with pytest.raises(ValueError):
        transport.parse_addr("host:port")


def test_frames_from_bytes_pads_last():
    frames = transport.frames_from_bytes(b"abcdefg", 3)
    assert frames == [b"abc", b"def", b"g\0\0"]
    assert transport.frames_from_bytes(b"", 3) == []


def test_inbox_newest_ack_wins():
    box = transport.FeedbackInbox(10)
    assert box.offer(encode_feedback(FeedbackPacket(10, 5, 2)))
    assert not box.offer(encode_feedback(FeedbackPacket(9, 1, 1)))
    assert box.latest == CodeParams(10, 5, 2)
    assert not box.offer(encode_feedback(FeedbackPacket(11, 2, 5)))  # invalid ordering
    assert not box.offer(b"junk")
    assert box.offer(encode_feedback(FeedbackPacket(12, 0, 0)))
    assert box.latest.is_uncoded


def test_zero_loss_loopback():
    frames = list(transport.random_frames(300, 300, seed=1))
    stats, res = loopback(frames)
    assert res.stream(300) == b"".join(frames)
    assert res.lost(300) == [] and res.received == 300
    assert stats.sent == 300 and stats.wire_bytes == 300 * (300 + 14)  # never left uncoded


def test_feedback_is_zero_without_loss():
    sock = udp()
    addr, th, box = start_receiver(T=4, L=10, frames=20, idle_timeout=2.0)
    enc = StreamEncoder(4)
    for i in range(20):
        sock.sendto(encode_packet(enc.encode(bytes([i]) * 5)), addr)
        fb = decode_feedback(sock.recv(64))
        assert (fb.ack_seq, fb.B, fb.N) == (i, 0, 0)
    th.join(10)
    sock.close()


def test_out_of_order_and_malformed():
    sock = udp()
    addr, th, box = start_receiver(T=4, L=10, frames=12, idle_timeout=1.0)
    enc = StreamEncoder(4, CodeParams(4, 1, 1))
    pkts = [encode_packet(enc.encode(bytes([i]) * 6)) for i in range(12)]
    for i in (0, 1, 2, 3, 5, 4, 6, 7, None, 8, 9, 10, 11):
        sock.sendto(b"\xc5\x01 garbage" if i is None else pkts[i], addr)
        sock.recv(64)
    th.join(10)
    res = box["res"]
    assert res.late == 1 and res.malformed == 1 and res.received == 11
    # frame 4 was counted erased but a single loss is within C(4,1,1)
    assert res.frames[4] == bytes([4]) * 6
    sock.close()


def test_lockstep_loopback_matches_simulator():
    T, L = 10, 50
    cfg = channel.FritchmanConfig(M=5, alpha=0.02, beta=0.8, epsilon=0.01, seed=8)
    drop = channel.generate(cfg, 1500)
    frames = list(transport.random_frames(1500, 64, seed=2))
    _, res = loopback(frames, T=T, L=L, drop=drop)
    sim = harness.run_experiment(harness.ExperimentConfig("adaptive", T, L, 30, frame_bytes=64), drop)
    got = np.array([res.frames.get(s) is not None for s in range(1500)])
    assert np.array_equal(got, sim.delivered)
    assert all(res.frames[s] == frames[s] for s in range(1500) if got[s])
    assert res.dropped == int(drop.sum())


def test_ticked_sender_paces_packets():
    frames = list(transport.random_frames(30, 300))
    t0 = time.monotonic()
    _, res = loopback(frames, tick_ms=10.0)
    elapsed = time.monotonic() - t0
    assert elapsed >= 0.28
    assert res.lost(30) == []
    # 300 bytes every 10 ms
    assert 300 * 8 / 0.010 == 240_000
