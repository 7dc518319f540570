"""Optimal (T, B, N) block codes over GF(256).

A code for parameters (T, B, N) is a systematic ``k x n`` generator with
``k = T - N + 1`` and ``n = T - N + B + 1``, so its rate equals the
(T, B, N)-capacity exactly. Message symbol ``j`` must be recoverable from
codeword positions ``<= min(j + T, n - 1)`` whenever the erasure pattern has
span at most B or weight at most N. Diagonal interleaving (see
:mod:`adaptfec.codec`) turns that per-symbol deadline into a streaming delay
of T packets.

Codes are found by a seeded random search and certified by
:func:`verify_block_code`; results are kept in a text code table so the
search cost is paid once.
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
import random
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import gf256

log = logging.getLogger(__name__)

MAX_T = 11


@dataclass(frozen=True, order=True)
class CodeParams:
    """Decoding delay ``T``, burst capability ``B``, arbitrary-loss capability ``N``.

    ``B == N == 0`` denotes the uncoded (rate-one) state.
    """

    T: int
    B: int
    N: int

    def __post_init__(self) -> None:
        if self.B == 0 and self.N == 0:
            if self.T < 0:
                raise ValueError(f"invalid delay T={self.T}")
            return
        if not (self.T >= self.B >= self.N >= 1):
            raise ValueError(f"need T >= B >= N >= 1, got (T, B, N) = ({self.T}, {self.B}, {self.N})")

    @classmethod
    def uncoded(cls, T: int) -> "CodeParams":
        return cls(T, 0, 0)

    @property
    def is_uncoded(self) -> bool:
        return self.B == 0

    @property
    def is_mds(self) -> bool:
        return self.B == self.N

    @property
    def k(self) -> int:
        return 1 if self.is_uncoded else self.T - self.N + 1

    @property
    def n(self) -> int:
        return 1 if self.is_uncoded else self.T - self.N + self.B + 1

    def __str__(self) -> str:
        return f"C({self.T},{self.B},{self.N})"


def capacity(params: CodeParams) -> Fraction:
    """(T - N + 1) / (T - N + B + 1) as an exact fraction; 1 when uncoded."""
    if params.is_uncoded:
        return Fraction(1)
    T, B, N = params.T, params.B, params.N
    return Fraction(T - N + 1, T - N + B + 1)


def capacity_of(T: int, B: int, N: int) -> Fraction:
    return capacity(CodeParams(T, B, N))


# -- erasure patterns -------------------------------------------------------


def wt_span(bits: Sequence[int]) -> tuple[int, int]:
    """Weight and span of a binary erasure pattern (span 0 iff weight 0)."""
    ones = [i for i, b in enumerate(bits) if b]
    if not ones:
        return 0, 0
    return len(ones), ones[-1] - ones[0] + 1


def is_bn_pattern(bits: Sequence[int], B: int, N: int) -> bool:
    wt, span = wt_span(bits)
    return span <= B or wt <= N


class WindowClass(enum.Enum):
    CORRECTABLE = "correctable"
    ALL_ONES = "all-ones"
    OUTSIDE = "outside"


def classify_window(bits: Sequence[int], B: int, N: int) -> WindowClass:
    wt, span = wt_span(bits)
    if bits and wt == len(bits):
        return WindowClass.ALL_ONES
    if span <= B or wt <= N:
        return WindowClass.CORRECTABLE
    return WindowClass.OUTSIDE


def admissible_patterns(n: int, B: int, N: int) -> list[tuple[int, ...]]:
    """All length-``n`` patterns with span <= B or weight <= N.

    Ordered by weight, then by erased positions in lexicographic order.
    """
    out = []
    for w in range(n + 1):
        for ones in itertools.combinations(range(n), w):
            if w <= N or (w and ones[-1] - ones[0] + 1 <= B):
                bits = [0] * n
                for i in ones:
                    bits[i] = 1
                out.append(tuple(bits))
    return out


def maximal_patterns(n: int, B: int, N: int) -> list[frozenset[int]]:
    """Erased-position sets that dominate every admissible pattern.

    Recoverability is monotone (erasing fewer positions never hurts), so
    checking length-B bursts and weight-N sets suffices.
    """
    pats: list[frozenset[int]] = []
    seen = set()
    candidates = itertools.chain(
        (range(b, b + B) for b in range(n - B + 1)),
        itertools.combinations(range(n), min(N, n)),
    )
    for c in candidates:
        s = frozenset(c)
        if s not in seen:
            seen.add(s)
            pats.append(s)
    return pats


# -- codes --------------------------------------------------------------------


@dataclass(eq=False)
class BlockCode:
    """Systematic generator ``[I_k | P]`` for a (T, B, N) code.

    ``generator[j, p]`` must be zero whenever ``p - j > T``: such a term would
    reach beyond the decoding deadline of symbol ``j`` and would force the
    encoder to keep more than T frames of history.
    """

    params: CodeParams
    generator: np.ndarray
    seed: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        p = self.params
        if p.is_uncoded:
            raise ValueError("the uncoded state has no block code")
        g = np.asarray(self.generator, dtype=np.uint8)
        if g.shape != (p.k, p.n):
            raise ValueError(f"generator must be {p.k}x{p.n}, got {g.shape[0]}x{g.shape[1]}")
        if not np.array_equal(g[:, : p.k], np.eye(p.k, dtype=np.uint8)):
            raise ValueError("generator is not systematic")
        for j in range(p.k):
            if g[j, j + p.T + 1 :].any():
                raise ValueError(f"row {j} has a parity term beyond delay T={p.T}")
        g.setflags(write=False)
        self.generator = g
        self._parity_rows = [[int(v) for v in row[p.k :]] for row in g]

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def rate(self) -> Fraction:
        return Fraction(self.k, self.n)

    @property
    def parity(self) -> np.ndarray:
        return self.generator[:, self.k :]

    def deadline(self, j: int) -> int:
        return min(j + self.params.T, self.n - 1)

    def encode(self, message: Sequence[int]) -> list[int]:
        """Codeword for a message of ``k`` field elements."""
        if len(message) != self.k:
            raise ValueError(f"message must have {self.k} symbols")
        out = list(message)
        for p in range(self.k, self.n):
            acc = 0
            for j, m in enumerate(message):
                acc ^= gf256.mul(int(self.generator[j, p]), m)
            out.append(acc)
        return out

    def symbol_recoverable(self, j: int, erased: int) -> bool:
        """Whether message symbol ``j`` is determined by its deadline.

        ``erased`` is a bitmask over codeword positions (bit ``p`` set means
        position ``p`` is unavailable). Bits past the deadline are ignored.
        """
        if not (erased >> j) & 1:
            return True
        dl = self.deadline(j)
        erased &= (1 << (dl + 1)) - 1
        key = (j, erased)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._solve_mask(j, erased, dl)
            self._cache[key] = hit
        return hit

    def _solve_mask(self, j: int, erased: int, dl: int) -> bool:
        k = self.k
        unknowns = [i for i in range(k) if (erased >> i) & 1]
        rows = [
            [self._parity_rows[i][p - k] for i in unknowns]
            for p in range(k, dl + 1)
            if not (erased >> p) & 1
        ]
        det = gf256.determined_unknowns(rows, len(unknowns))
        return unknowns.index(j) in det


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    checked: int
    pattern: tuple[int, ...] | None = None
    symbol: int | None = None

    def __bool__(self) -> bool:
        return self.passed


def _pattern_groups(params: CodeParams):
    """(erased message symbols, available parity rows, symbols due) per maximal pattern."""
    T, k, n = params.T, params.k, params.n
    groups = []
    for e in maximal_patterns(n, params.B, params.N):
        unknowns = [j for j in range(k) if j in e]
        if not unknowns:
            continue
        for dl in sorted({min(j + T, n - 1) for j in unknowns}):
            avail = [p for p in range(k, dl + 1) if p not in e]
            due = [c for c, j in enumerate(unknowns) if min(j + T, n - 1) == dl]
            groups.append((unknowns, avail, due))
    return groups


def _group_failures(parity_rows, k: int, group) -> int:
    unknowns, avail, due = group
    rows = [[parity_rows[j][p - k] for j in unknowns] for p in avail]
    det = gf256.determined_unknowns(rows, len(unknowns))
    return sum(1 for c in due if c not in det)


def verify_block_code(code: BlockCode, exhaustive: bool = False) -> VerificationReport:
    """Certify that ``code`` corrects every (B, N) pattern within per-symbol delay.

    By default only maximal patterns are checked (enough by monotonicity);
    ``exhaustive=True`` walks every admissible pattern. On failure the report
    carries the first failing admissible pattern and message symbol.
    """
    p = code.params
    if exhaustive:
        pats = admissible_patterns(p.n, p.B, p.N)
        for i, bits in enumerate(pats):
            sym = _first_unrecoverable(code, bits)
            if sym is not None:
                return VerificationReport(False, i + 1, bits, sym)
        return VerificationReport(True, len(pats))

    groups = _pattern_groups(p)
    rows = code._parity_rows
    for g in groups:
        if _group_failures(rows, p.k, g):
            return verify_block_code(code, exhaustive=True)
    return VerificationReport(True, len(groups))


def _first_unrecoverable(code: BlockCode, bits: Sequence[int]) -> int | None:
    mask = sum(1 << i for i, b in enumerate(bits) if b)
    for j in range(code.k):
        if bits[j] and not code.symbol_recoverable(j, mask):
            return j
    return None


# -- construction -------------------------------------------------------------


class CodeConstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class SearchStats:
    draws: int
    restarts: int
    moves: int
    initial_failures: int


def _cauchy(k: int, b: int) -> list[list[int]]:
    return [[gf256.inv(i ^ (k + r)) for r in range(b)] for i in range(k)]


def _structured(params: CodeParams, rng: random.Random) -> list[list[int]]:
    """Random parity block with the zero/rank pattern that bursts force.

    Parity column ``r`` sits at position ``t = k + r`` and may only touch
    message symbols ``j >= d = max(t - T, 0)``. It always carries its own
    symbol ``m_d``; what it holds beyond ``d`` depends on the regime.

    When a burst fits inside the message (``B <= k``), a burst starting at
    symbol 0 must be peeled one symbol per position, which needs every
    column's coefficients on ``m_{d+1} .. m_{B-1}`` to lie in one fixed
    ``(N-1)``-dimensional space. Symbols from ``B`` on are free.

    Otherwise a burst from symbol ``x`` leaves only ``R + 1 = T - B + 1``
    parity columns ``x+B .. x+T`` before ``m_x`` is due, so their
    coefficients on ``m_{x+1}..`` may have rank at most ``R``. Columns before
    position T are dense, and column ``T + x`` is ``m_x`` plus a random
    combination of the ``R`` columns before it, restricted to ``m_{x+1}..``.
    """
    T, B, N, k = params.T, params.B, params.N, params.k

    def nz() -> int:
        return rng.randrange(1, 256)

    rows = [[0] * B for _ in range(k)]
    if B <= k:
        basis = [[nz() for _ in range(k)] for _ in range(N - 1)]
        for r in range(B):
            d = max(k + r - T, 0)
            lam = [nz() for _ in basis]
            rows[d][r] = nz()
            for j in range(d + 1, k):
                if j >= B:
                    rows[j][r] = nz()
                    continue
                acc = 0
                for c, w in zip(lam, basis):
                    acc ^= gf256.mul(c, w[j])
                rows[j][r] = acc
        return rows
    R = T - B
    for r in range(B):
        t = k + r
        if t < T:
            for j in range(k):
                rows[j][r] = nz()
            continue
        x = t - T
        rows[x][r] = nz()
        for src in range(r - R, r):
            c = nz()
            for j in range(x + 1, k):
                rows[j][r] ^= gf256.mul(c, rows[j][src])
    return rows


def search_code(
    params: CodeParams,
    seed: int = 0,
    draws: int = 64,
    max_moves: int = 400_000,
    restart_every: int = 20_000,
    temperature: float = 0.3,
) -> tuple[BlockCode, SearchStats]:
    """Find a code passing :func:`verify_block_code` by seeded random search.

    MDS parameters (B == N) start from a Cauchy matrix, which always works.
    Otherwise up to ``draws`` candidates come from :func:`_structured`; in
    practice one of the first few passes. Should all of them fail, a local
    search takes over: single parity entries are resampled (zero allowed),
    moves that do not increase the number of failing pattern/symbol pairs
    are kept and worse ones accepted with probability
    ``exp(-delta / temperature)``, restarting from a fresh structured draw
    every ``restart_every`` moves.
    """
    T, B, N = params.T, params.B, params.N
    if params.is_uncoded or T > MAX_T:
        raise ValueError(f"cannot construct a code for {params}")
    k = params.k
    groups = _pattern_groups(params)
    rng = random.Random(f"{T},{B},{N},{seed}")

    def done(rows, d, restarts, moves, initial) -> tuple[BlockCode, SearchStats]:
        gen = np.zeros((k, params.n), dtype=np.uint8)
        gen[:, :k] = np.eye(k, dtype=np.uint8)
        gen[:, k:] = rows
        return BlockCode(params, gen, seed), SearchStats(d, restarts, moves, initial)

    def failures(rows) -> list[int]:
        return [_group_failures(rows, k, g) for g in groups]

    best = None
    initial = None
    for d in range(1, draws + 1):
        rows = _cauchy(k, B) if B == N and d == 1 else _structured(params, rng)
        fails = failures(rows)
        total = sum(fails)
        if initial is None:
            initial = total
        if total == 0:
            return done(rows, d, 0, 0, initial)
        if best is None or total < best[0]:
            best = (total, rows, fails)

    allowed = [(j, r) for j in range(k) for r in range(B) if k + r - j <= T]
    touch: dict[tuple[int, int], list[int]] = {a: [] for a in allowed}
    for gi, (unknowns, avail, _) in enumerate(groups):
        for j in unknowns:
            for p in avail:
                if (j, p - k) in touch:
                    touch[(j, p - k)].append(gi)
    total, rows, fails = best
    moves = 0
    restart = 0
    while moves < max_moves:
        if restart:
            rows = _structured(params, rng)
            fails = failures(rows)
            total = sum(fails)
        for _ in range(min(restart_every, max_moves - moves)):
            if total == 0:
                return done(rows, draws, restart, moves, initial)
            moves += 1
            a = rng.choice(allowed)
            j, r = a
            old = rows[j][r]
            rows[j][r] = 0 if rng.random() < 0.25 else rng.randrange(1, 256)
            if rows[j][r] == old:
                continue
            new = {gi: _group_failures(rows, k, groups[gi]) for gi in touch[a]}
            delta = sum(v - fails[gi] for gi, v in new.items())
            if delta <= 0 or rng.random() < math.exp(-delta / temperature):
                total += delta
                for gi, v in new.items():
                    fails[gi] = v
            else:
                rows[j][r] = old
        if total == 0:
            return done(rows, draws, restart, moves, initial)
        restart += 1
    raise CodeConstructionError(
        f"no code found for {params} (seed {seed}) after {draws} draws and {moves} moves"
    )


# -- code table -----------------------------------------------------------------


def format_code_table(codes: Iterable[BlockCode]) -> str:
    lines = []
    for c in codes:
        p = c.params
        lines.append(f"{p.T} {p.B} {p.N} {p.n} {p.k} {c.seed}")
        for row in c.generator:
            lines.append(" ".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_code_table(path: str | Path, codes: Iterable[BlockCode]) -> None:
    Path(path).write_text(format_code_table(codes))


def parse_code_table(text: str, verify: bool = True) -> list[BlockCode]:
    """Parse a code table; every record is re-verified unless ``verify`` is False."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    codes = []
    i = 0
    while i < len(lines):
        head = lines[i]
        if len(head) != 6:
            raise ValueError(f"bad code-table header on record line {i + 1}: {' '.join(head)}")
        T, B, N, n, k, seed = map(int, head)
        params = CodeParams(T, B, N)
        if (n, k) != (params.n, params.k):
            raise ValueError(f"{params}: header says n={n}, k={k}")
        rows = lines[i + 1 : i + 1 + k]
        if len(rows) != k or any(len(r) != n for r in rows):
            raise ValueError(f"{params}: truncated generator")
        gen = np.array([[int(v) for v in r] for r in rows], dtype=np.int64)
        if gen.min() < 0 or gen.max() > 255:
            raise ValueError(f"{params}: generator entry out of byte range")
        code = BlockCode(params, gen.astype(np.uint8), seed)
        if verify:
            report = verify_block_code(code)
            if not report:
                raise ValueError(f"{params}: fails verification at pattern {report.pattern}")
        codes.append(code)
        i += 1 + k
    return codes


def read_code_table(path: str | Path, verify: bool = True) -> list[BlockCode]:
    return parse_code_table(Path(path).read_text(), verify=verify)


_lock = threading.Lock()
_cache: dict[tuple[int, int, int], BlockCode] = {}
_packaged: dict[tuple[int, int, int], BlockCode] | None = None


def packaged_codes() -> dict[tuple[int, int, int], BlockCode]:
    """Codes shipped with the package, unverified (``construct_code`` checks each on first use)."""
    global _packaged
    with _lock:
        if _packaged is None:
            text = resources.files("adaptfec").joinpath("data/codes.txt").read_text()
            codes = parse_code_table(text, verify=False)
            _packaged = {(c.params.T, c.params.B, c.params.N): c for c in codes}
        return _packaged


def construct_code(params: CodeParams, seed: int = 0) -> BlockCode:
    """Return a verified code for ``params``, cached per (T, B, N).

    Looks in the in-memory cache, then the packaged code table, then searches.
    """
    key = (params.T, params.B, params.N)
    with _lock:
        hit = _cache.get(key)
    if hit is not None:
        return hit
    code = packaged_codes().get(key)
    if code is not None and not verify_block_code(code):
        log.warning("packaged %s fails verification; searching", params)
        code = None
    if code is None:
        code, stats = search_code(params, seed)
        log.info("searched %s: %d draws, %d moves", params, stats.draws, stats.moves)
    with _lock:
        return _cache.setdefault(key, code)
