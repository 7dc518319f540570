"""Experiment driver: strategies, per-session metrics, and CSV output.

A run walks a loss trace one channel use at a time. The source's code
schedule picks the parity for each packet; the destination's estimator sees
every received packet and its estimate reaches the source before the next
use. Which frames survive is then computed from the erasure mask with
:func:`adaptfec.codec.simulate_recovery`, the frame-level twin of the byte
decoder.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .blockcode import CodeParams, capacity, capacity_of
from .codec import CodeSchedule, PacketCodes, parity_size, simulate_recovery
from .estimator import InterleavedEstimator

LOW_FIDELITY_FLR = 0.1
CSV_HEADER = "session,flr,rate,low_fidelity,non_mds_fraction"


class Strategy(str, enum.Enum):
    UNCODED = "uncoded"
    FIXED = "fixed"
    MDS = "mds"
    ADAPTIVE = "adaptive"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    strategy: Strategy = Strategy.ADAPTIVE
    T: int = 10
    L: int = 1000
    sessions: int = 360
    frame_bytes: int = 300
    B: int | None = None
    N: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.L < 1 or self.sessions < 1 or self.frame_bytes < 1:
            raise ConfigError("L, sessions and frame size must be positive")
        if self.strategy is Strategy.FIXED:
            if self.B is None or self.N is None:
                raise ConfigError("fixed strategy needs B and N")
            try:
                CodeParams(self.T, self.B, self.N)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None

    @property
    def length(self) -> int:
        return self.L * self.sessions


@dataclass(frozen=True)
class SessionMetrics:
    index: int
    flr: float
    rate: float
    low_fidelity: bool
    non_mds_fraction: float


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    sessions: list[SessionMetrics]
    delivered: np.ndarray = field(repr=False)
    codes: list[PacketCodes] = field(repr=False)
    targets: list[CodeParams] = field(repr=False)

    @property
    def avg_flr(self) -> float:
        return float(np.mean([s.flr for s in self.sessions]))

    @property
    def low_fidelity_fraction(self) -> float:
        return float(np.mean([s.low_fidelity for s in self.sessions]))

    @property
    def avg_rate(self) -> float:
        return float(np.mean([s.rate for s in self.sessions]))

    @property
    def non_mds_fraction(self) -> float:
        """Share of coded channel uses whose code is non-MDS (B > N)."""
        coded = [t for t in self.targets if not t.is_uncoded]
        if not coded:
            return 0.0
        return sum(t.B > t.N for t in coded) / len(coded)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for s in self.sessions:
            buf.write(f"{s.index},{s.flr:.6f},{s.rate:.6f},{int(s.low_fidelity)},{s.non_mds_fraction:.6f}\n")
        buf.write(f"#agg,{self.avg_flr:.6f},{self.low_fidelity_fraction:.6f},{self.avg_rate:.6f}\n")
        return buf.getvalue()


def mds_quantize(T: int, B: int, N: int) -> CodeParams:
    """Fastest MDS code no faster than C(T, B, N); (0, 0) stays uncoded."""
    if B == 0 and N == 0:
        return CodeParams.uncoded(T)
    target = capacity_of(T, B, N)
    for n in range(1, T + 1):
        if capacity_of(T, n, n) <= target:
            return CodeParams(T, n, n)
    raise AssertionError("C(T,T,T) is the minimum capacity")


def requested_code(strategy: Strategy, T: int, estimate: tuple[int, int]) -> CodeParams:
    """Code the source should move to given the destination's latest estimate."""
    B, N = estimate
    if strategy is Strategy.MDS:
        return mds_quantize(T, B, N)
    if B == 0:
        return CodeParams.uncoded(T)
    return CodeParams(T, B, N)


def _schedule(config: ExperimentConfig, erased: np.ndarray) -> tuple[list[PacketCodes], list[CodeParams]]:
    T = config.T
    s = config.strategy
    if s in (Strategy.UNCODED, Strategy.FIXED):
        params = CodeParams.uncoded(T) if s is Strategy.UNCODED else CodeParams(T, config.B, config.N)
        n = len(erased)
        return [PacketCodes(params)] * n, [params] * n
    sched = CodeSchedule(T)
    est = InterleavedEstimator(T, config.L)
    codes, targets = [], []
    for t, lost in enumerate(erased.tolist()):
        codes.append(sched.next())
        targets.append(sched.target or sched.active)
        if not lost:
            sched.request(requested_code(s, T, est.on_receipt(t)))
    return codes, targets


def run_experiment(config: ExperimentConfig, trace) -> ExperimentResult:
    """Run one strategy over the first ``L * sessions`` uses of ``trace``."""
    trace = np.asarray(trace, dtype=bool)
    if len(trace) < config.length:
        raise ConfigError(f"trace has {len(trace)} uses, experiment needs {config.length}")
    erased = trace[: config.length]
    codes, targets = _schedule(config, erased)
    delivered = simulate_recovery(erased, codes, config.T)

    P = config.frame_bytes
    rate_cache: dict[PacketCodes, float] = {}

    def rate(pc: PacketCodes) -> float:
        r = rate_cache.get(pc)
        if r is None:
            extra = sum(parity_size(P, c) for c in pc.coded())
            r = rate_cache[pc] = P / (P + extra)
        return r

    rates = np.array([rate(pc) for pc in codes])
    non_mds = np.array([int(not t.is_uncoded and t.B > t.N) for t in targets])
    coded = np.array([int(not t.is_uncoded) for t in targets])
    sessions = []
    L = config.L
    for m in range(config.sessions):
        sl = slice(m * L, (m + 1) * L)
        flr = 1.0 - float(delivered[sl].mean())
        c = int(coded[sl].sum())
        sessions.append(
            SessionMetrics(
                index=m,
                flr=flr,
                rate=float(rates[sl].mean()),
                low_fidelity=flr > LOW_FIDELITY_FLR,
                non_mds_fraction=float(non_mds[sl].sum() / c) if c else 0.0,
            )
        )
    return ExperimentResult(config, sessions, delivered, codes, targets)


def best_fixed_search(
    trace,
    rate_budget: Fraction | float,
    T: int = 10,
    L: int = 1000,
    sessions: int | None = None,
) -> tuple[CodeParams, ExperimentResult]:
    """Fixed code with the lowest average FLR among those with rate <= ``rate_budget``.

    Ties go to the higher rate, then the smaller B.
    """
    cands = [
        CodeParams(T, B, N)
        for B in range(1, T + 1)
        for N in range(1, B + 1)
        if capacity_of(T, B, N) <= rate_budget
    ]
    if not cands:
        raise ConfigError(f"no code with rate <= {rate_budget} for T={T}")
    if sessions is None:
        sessions = len(trace) // L
    best = None
    for p in cands:
        res = run_experiment(ExperimentConfig(Strategy.FIXED, T, L, sessions, B=p.B, N=p.N), trace)
        key = (res.avg_flr, -capacity(p), p.B)
        if best is None or key < best[0]:
            best = (key, p, res)
    return best[1], best[2]
