"""Fritchman erasure channel and loss-trace files.

The chain has one good state ``G`` (index 0) and bad states ``E_1..E_M``
(indices 1..M). Each step first decides whether the packet is lost in the
current state, then moves: ``G -> E_1`` with probability alpha, ``E_l ->
E_{l+1}`` with probability beta, ``E_M -> G`` with probability beta. Bad
states always lose; ``G`` loses with probability epsilon.

Randomness comes from numpy's PCG64 seeded through ``SeedSequence``, so a
(config, seed) pair gives the same trace on every platform.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

GOOD = 0


@dataclass(frozen=True)
class FritchmanConfig:
    M: int = 5
    alpha: float = 0.005
    beta: float = 0.990
    epsilon: float = 0.001
    seed: int = 0

    def __post_init__(self) -> None:
        if self.M < 1:
            raise ValueError("need at least one bad state")
        if not (0 <= self.alpha <= 1 and 0 <= self.beta <= 1):
            raise ValueError("alpha and beta must be probabilities")
        if not (0 <= self.epsilon < 1):
            raise ValueError("epsilon must be in [0, 1)")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def fritchman_step(state: int, cfg: FritchmanConfig, rng: np.random.Generator) -> tuple[bool, int]:
    """One channel use: ``(erased, next_state)``."""
    u_loss, u_move = rng.random(2)
    return _step(state, cfg, u_loss, u_move)


def _step(state: int, cfg: FritchmanConfig, u_loss: float, u_move: float) -> tuple[bool, int]:
    if state == GOOD:
        return bool(u_loss < cfg.epsilon), (1 if u_move < cfg.alpha else GOOD)
    if u_move < cfg.beta:
        return True, (GOOD if state == cfg.M else state + 1)
    return True, state


def transition_matrix(cfg: FritchmanConfig) -> np.ndarray:
    M = cfg.M
    P = np.zeros((M + 1, M + 1))
    P[0, 0], P[0, 1] = 1 - cfg.alpha, cfg.alpha
    for s in range(1, M + 1):
        P[s, s] = 1 - cfg.beta
        P[s, 0 if s == M else s + 1] += cfg.beta
    return P


def stationary_distribution(cfg: FritchmanConfig) -> np.ndarray:
    P = transition_matrix(cfg)
    w, v = np.linalg.eig(P.T)
    pi = np.real(v[:, np.argmin(np.abs(w - 1))])
    return pi / pi.sum()


def stationary_loss_rate(cfg: FritchmanConfig) -> float:
    pi = stationary_distribution(cfg)
    return float(pi[0] * cfg.epsilon + pi[1:].sum())


def generate(cfg: FritchmanConfig, length: int, pinned: slice | None = None) -> np.ndarray:
    """Loss trace of ``length`` uses starting in ``G``.

    Uses inside ``pinned`` keep the chain in ``G`` (independent losses with
    probability epsilon).
    """
    rng = make_rng(cfg.seed)
    u = rng.random((length, 2))
    out = np.zeros(length, dtype=np.uint8)
    lo, hi = (pinned.start, pinned.stop) if pinned is not None else (length, length)
    state = GOOD
    eps, alpha = cfg.epsilon, cfg.alpha
    for t in range(length):
        ul, um = u[t]
        if lo <= t < hi:
            state = GOOD
            out[t] = ul < eps
            continue
        if state == GOOD:
            out[t] = ul < eps
            if um < alpha:
                state = 1
        else:
            erased, state = _step(state, cfg, ul, um)
            out[t] = erased
    return out


def generate_trace(cfg: FritchmanConfig, total: int, phases: int = 3) -> np.ndarray:
    """Three-phase trace: Fritchman dynamics in the outer quarters, ``G`` in the middle half."""
    if phases == 1:
        return generate(cfg, total)
    if phases != 3:
        raise ValueError("phases must be 1 or 3")
    return generate(cfg, total, pinned=slice(total // 4, 3 * total // 4))


# -- traces on disk -----------------------------------------------------------------


class TraceParseError(ValueError):
    def __init__(self, offset: int, char: str) -> None:
        super().__init__(f"invalid trace character {char!r} at offset {offset}")
        self.offset = offset


def parse_trace(text: str) -> np.ndarray:
    bits = []
    for i, ch in enumerate(text):
        if ch == "0" or ch == "1":
            bits.append(ch == "1")
        elif not ch.isspace():
            raise TraceParseError(i, ch)
    return np.array(bits, dtype=np.uint8)


def format_trace(trace, width: int = 100) -> str:
    s = "".join("1" if b else "0" for b in trace)
    return "\n".join(s[i : i + width] for i in range(0, len(s), width)) + "\n"


def read_trace(path: str | Path) -> np.ndarray:
    return parse_trace(Path(path).read_text())


def write_trace(path: str | Path, trace) -> None:
    Path(path).write_text(format_trace(trace))


def burst_histogram(trace) -> Counter:
    """Counts of maximal runs of consecutive losses, keyed by run length."""
    a = np.concatenate([[0], np.asarray(trace, dtype=np.int8), [0]])
    d = np.diff(a)
    starts = np.nonzero(d == 1)[0]
    ends = np.nonzero(d == -1)[0]
    return Counter((ends - starts).tolist())


def format_histogram(hist: Counter) -> str:
    return "".join(f"{length},{hist[length]}\n" for length in sorted(hist))


def histogram_modes(hist: Counter, min_share: float = 0.0) -> list[int]:
    """Local maxima of a burst histogram (missing lengths count zero).

    Peaks holding less than ``min_share`` of all bursts are ignored, which
    keeps isolated long bursts in a sparse tail from counting as modes.
    """
    total = sum(hist.values())
    return [
        b
        for b in sorted(hist)
        if hist[b] > hist.get(b - 1, 0) and hist[b] > hist.get(b + 1, 0) and hist[b] >= min_share * total
    ]

