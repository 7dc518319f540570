import random

import numpy as np
import pytest

from adaptfec.blockcode import CodeParams, admissible_patterns, construct_code
from adaptfec.codec import (
    CodeSchedule,
    PacketCodes,
    StreamDecoder,
    StreamEncoder,
    lanes,
    parity_size,
    run_stream,
    simulate_recovery,
    unlanes,
)

from . import oracles


def random_frames(count, size, seed=0):
    rng = np.random.default_rng(seed)
    return [rng.integers(0, 256, size, dtype=np.uint8).tobytes() for _ in range(count)]


def decode_all(packets, erased, T):
    dec = StreamDecoder(T)
    out = []
    for pkt, lost in zip(packets, erased):
        out += dec.push(pkt.seq, None if lost else pkt)
    out += dec.finish()
    return out


def test_lanes_round_trip():
    f = np.arange(10, dtype=np.uint8)
    L = lanes(f, 3)
    assert L.shape == (3, 4)
    assert list(L[0]) == [0, 3, 6, 9] and list(L[2]) == [2, 5, 8, 0]
    assert unlanes(L, 10) == f.tobytes()


def test_uncoded_has_no_parity():
    enc = StreamEncoder(4)
    for payload in random_frames(5, 20):
        pkt = enc.encode(payload)
        assert pkt.parity == b"" and pkt.params2 is None and pkt.params.is_uncoded


def test_zero_frames_give_zero_parity():
    enc = StreamEncoder(5, CodeParams(5, 3, 2))
    for _ in range(30):
        pkt = enc.encode(bytes(40))
        assert not any(pkt.parity)


@pytest.mark.parametrize("params", [CodeParams(2, 1, 1), CodeParams(4, 3, 2), CodeParams(5, 5, 1), CodeParams(3, 3, 3)], ids=str)
@pytest.mark.parametrize("size", [1, 7, 30])
def test_encoder_matches_semi_infinite_generator(params, size):
    frames = random_frames(12, size, seed=size)
    enc = StreamEncoder(params.T, params)
    got = [enc.encode(f).parity for f in frames]
    want = oracles.stream_parity_oracle(construct_code(params), frames)
    assert got == want
    assert all(len(p) == parity_size(size, params) for p in got)


def test_parity_depends_only_on_last_T_frames():
    p = CodeParams(4, 3, 2)
    a = random_frames(20, 16, seed=1)
    b = random_frames(20, 16, seed=2)
    b[-5:] = a[-5:]  # identical from seq 15
    ea, eb = StreamEncoder(4, p), StreamEncoder(4, p)
    pa = [ea.encode(f).parity for f in a]
    pb = [eb.encode(f).parity for f in b]
    assert pa[-1] == pb[-1]


def test_round_trip_without_erasures():
    rng = random.Random(0)
    for params in [CodeParams(10, 5, 2), CodeParams(3, 1, 1), CodeParams(6, 6, 6), CodeParams.uncoded(4)]:
        frames = random_frames(1000 if params.T == 10 else 200, 300 if params.T == 10 else 50, seed=rng.randrange(99))
        out = run_stream(frames, [False] * len(frames), params.T, params)
        assert [s for s, _ in out] == list(range(len(frames)))
        assert [d for _, d in out] == frames


def test_frames_emitted_on_arrival_when_clean():
    enc, dec = StreamEncoder(5, CodeParams(5, 2, 1)), StreamDecoder(5)
    for i, f in enumerate(random_frames(10, 9)):
        assert dec.push(i, enc.encode(f)) == [(i, f)]


def test_burst_recovered_by_deadline():
    T, p = 10, CodeParams(10, 5, 2)
    frames = random_frames(40, 300)
    enc, dec = StreamEncoder(T, p), StreamDecoder(T)
    emitted_at = {}
    for i, f in enumerate(frames):
        pkt = enc.encode(f)
        for s, d in dec.push(i, None if 5 <= i <= 9 else pkt):
            emitted_at[s] = i
            assert d == frames[s]
    for s in range(5, 10):
        assert emitted_at[s] <= s + T


def test_window_of_T_plus_one_losses_is_lost():
    for p in [CodeParams(4, 4, 4), CodeParams(4, 2, 1), CodeParams(6, 5, 3)]:
        T = p.T
        frames = random_frames(4 * (T + 1), 10)
        erased = [T + 1 <= i < 2 * (T + 1) for i in range(len(frames))]
        out = dict(run_stream(frames, erased, T, p))
        # the first frame of the burst sees nothing before its deadline
        assert out[T + 1] is None
        assert all(out[s] == frames[s] for s in out if not erased[s])


def test_long_gap_releases_each_frame_at_its_deadline():
    p = CodeParams(4, 2, 1)
    frames = random_frames(30, 8)
    enc, dec = StreamEncoder(4, p), StreamDecoder(4)
    pkts = [enc.encode(f) for f in frames]
    out = []
    for i in range(10):
        out += dec.push(i, None if i == 9 else pkts[i])
    out += dec.push(29, pkts[29])  # jump far past frame 9's deadline
    assert [s for s, _ in out] == list(range(26))  # 26..28 still inside their windows
    out += dec.finish()
    assert [s for s, _ in out] == list(range(30))
    assert out[9][1] is None and all(d is None for _, d in out[10:29])
    assert out[29][1] == frames[29]


def test_decoder_rejects_foreign_delay_and_ignores_late():
    enc = StreamEncoder(3, CodeParams(3, 2, 1))
    pkts = [enc.encode(f) for f in random_frames(6, 8)]
    dec = StreamDecoder(4)
    assert dec.push(0, pkts[0]) == [] and dec.frame_size is None
    dec = StreamDecoder(3)
    dec.push(0, pkts[0])
    dec.push(2, pkts[2])
    assert dec.push(1, pkts[1]) == []  # arrived after seq 2: counted as lost


def test_payload_size_change_dropped():
    enc = StreamEncoder(3, CodeParams(3, 1, 1))
    enc.encode(b"ab")
    with pytest.raises(ValueError):
        enc.encode(b"abc")


def _exhaustive_window_cases(T):
    for B in range(1, T + 1):
        for N in range(1, B + 1):
            p = CodeParams(T, B, N)
            for bits in admissible_patterns(T + 1, B, N):
                if any(bits):
                    yield p, bits


@pytest.mark.parametrize("T", range(1, 6))
def test_every_admissible_window_recovered(T):
    """Each admissible (T+1)-window embedded in a clean 3(T+1) stream decodes fully, on time."""
    size = 12
    rng = random.Random(T)
    for p, bits in _exhaustive_window_cases(T):
        S = 3 * (T + 1)
        off = T + 1
        erased = [False] * S
        for i, b in enumerate(bits):
            erased[off + i] = bool(b)
        codes = [PacketCodes(p)] * S
        assert simulate_recovery(np.array(erased), codes, T).all(), (p, bits)
        if rng.random() < 0.15:  # byte-level spot check
            frames = random_frames(S, size, seed=rng.randrange(1000))
            enc, dec = StreamEncoder(T, p), StreamDecoder(T)
            for i, f in enumerate(frames):
                pkt = enc.encode(f)
                for s, d in dec.push(i, None if erased[i] else pkt):
                    assert d == frames[s] and i <= s + T


def test_decoder_matches_global_rank_oracle_on_random_patterns():
    """1000 random mostly non-admissible patterns: decoder, mask simulator and rank oracle agree."""
    rng = random.Random(7)
    params = [CodeParams(3, 2, 1), CodeParams(4, 3, 2), CodeParams(4, 4, 1), CodeParams(5, 3, 3), CodeParams(5, 4, 2)]
    for trial in range(1000):
        p = params[trial % len(params)]
        S = 14
        erased = [rng.random() < 0.35 for _ in range(S)]
        want = oracles.stream_recoverable_oracle(construct_code(p), erased, p.T)
        sim = simulate_recovery(np.array(erased), [PacketCodes(p)] * S, p.T)
        assert list(sim) == want, (p, erased)
        if trial % 10 == 0:
            frames = random_frames(S, 6, seed=trial)
            out = run_stream(frames, erased, p.T, p)
            assert [d is not None for _, d in out] == want
            assert all(d == frames[s] for s, d in out if d is not None)


# -- transitions ------------------------------------------------------------------


def test_schedule_transition_window():
    T = 4
    s = CodeSchedule(T)
    for _ in range(3):
        assert s.next() == PacketCodes(CodeParams.uncoded(T))
    s.request(CodeParams(T, 1, 1))  # uncoded -> coded at packet 3
    got = [s.next() for _ in range(T + 2)]
    assert all(pc == PacketCodes(CodeParams(T, 1, 1)) for pc in got)
    assert s.active == CodeParams(T, 1, 1)
    s.request(CodeParams(T, 3, 2))  # trigger i = 9
    got = [s.next() for _ in range(T + 2)]
    assert got[: T + 1] == [PacketCodes(CodeParams(T, 1, 1), CodeParams(T, 3, 2))] * (T + 1)
    assert got[T + 1] == PacketCodes(CodeParams(T, 3, 2))


def test_schedule_replacement_and_cancel():
    T = 3
    s = CodeSchedule(T, CodeParams(T, 1, 1))
    s.next()
    s.request(CodeParams(T, 2, 1))
    s.next()
    s.request(CodeParams(T, 2, 1))  # repeated estimate: activation unchanged
    assert s.pending == (CodeParams(T, 2, 1), 1 + T + 1)
    s.request(CodeParams(T, 3, 3))  # replaced: window restarts at seq 2
    assert s.pending == (CodeParams(T, 3, 3), 2 + T + 1)
    s.next()
    s.request(CodeParams(T, 1, 1))  # back to active: cancelled
    assert s.pending is None
    assert s.next() == PacketCodes(CodeParams(T, 1, 1))


def test_transition_to_uncoded_keeps_old_parity():
    T = 3
    s = CodeSchedule(T, CodeParams(T, 2, 1))
    s.request(CodeParams.uncoded(T))
    got = [s.next() for _ in range(T + 2)]
    assert got[: T + 1] == [PacketCodes(CodeParams(T, 2, 1))] * (T + 1)
    assert got[T + 1] == PacketCodes(CodeParams.uncoded(T))


def test_transition_safety_random_requests():
    """Whatever the request sequence, every code corrects one erasure, so any isolated loss is recovered."""
    rng = random.Random(3)
    T = 5
    options = [CodeParams(T, B, N) for B in range(1, T + 1) for N in range(1, B + 1)]
    for _ in range(30):
        enc = StreamEncoder(T, CodeParams(T, 2, 1))
        codes = []
        for i in range(120):
            if rng.random() < 0.15:
                enc.request(rng.choice(options))
            pkt = enc.encode(bytes([i % 256]) * 8)
            codes.append(PacketCodes(pkt.params, pkt.params2))
        for s in range(0, 120 - T, 3):
            erased = np.zeros(120, dtype=bool)
            erased[s] = True
            assert simulate_recovery(erased, codes, T)[s]


def test_dual_parity_recovery_across_transition():
    T = 6
    old, new = CodeParams(T, 2, 1), CodeParams(T, 4, 2)
    i = 20
    frames = random_frames(60, 24, seed=9)
    enc = StreamEncoder(T, old)
    pkts = []
    for t, f in enumerate(frames):
        if t == i:
            enc.request(new)
        pkts.append(enc.encode(f))
    assert pkts[i + T].dual and not pkts[i + T + 1].dual
    assert pkts[i - 1].params == old and pkts[i + T + 1].params == new
    # a 2-burst ending at i is an old-code pattern; a 4-burst after i + T is a new-code pattern
    erased = [t in (i - 1, i) or i + T + 3 <= t <= i + T + 6 for t in range(len(frames))]
    out = decode_all(pkts, erased, T)
    assert all(d == frames[s] for s, d in out)
    sim = simulate_recovery(np.array(erased), [PacketCodes(p.params, p.params2) for p in pkts], T)
    assert sim.all()


def test_simulator_matches_decoder_with_transitions():
    rng = random.Random(12)
    T = 4
    options = [CodeParams.uncoded(T)] + [CodeParams(T, B, N) for B in range(1, T + 1) for N in range(1, B + 1)]
    for trial in range(40):
        enc = StreamEncoder(T)
        frames = random_frames(80, 10, seed=trial)
        pkts = []
        for f in frames:
            if rng.random() < 0.1:
                enc.request(rng.choice(options))
            pkts.append(enc.encode(f))
        erased = [rng.random() < 0.2 for _ in frames]
        out = decode_all(pkts, erased, T)
        got = [d is not None for _, d in out]
        sim = simulate_recovery(np.array(erased), [PacketCodes(p.params, p.params2) for p in pkts], T)
        assert got == list(sim)
        assert all(d == frames[s] for s, d in out if d is not None)
