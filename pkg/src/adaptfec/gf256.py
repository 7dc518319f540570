"""Arithmetic over GF(2^8) and small dense linear algebra.

Elements are plain ints in ``0..255``. Addition is XOR; multiplication uses
log/antilog tables for the reduction polynomial x^8 + x^4 + x^3 + x + 1
(0x11B) with generator 0x03.

Two elimination routines live here. :func:`solve` works on numpy arrays and
accepts vector-valued right-hand sides (one column per byte of a lane), which
is what the stream decoder needs. :func:`determined_unknowns` is a pure-Python
variant without a right-hand side, used in the combinatorial code search where
matrices are tiny and numpy call overhead dominates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

POLY = 0x11B
GENERATOR = 0x03

EXP = [0] * 512
LOG = [0] * 256


def _build_tables() -> None:
    x = 1
    for i in range(255):
        EXP[i] = x
        LOG[x] = i
        # x * 3 = (x << 1) ^ x, reduced
        y = x << 1
        if y & 0x100:
            y ^= POLY
        x = y ^ x
    for i in range(255, 512):
        EXP[i] = EXP[i - 255]


_build_tables()

#: MUL_TABLE[a, b] == mul(a, b); indexing with uint8 arrays scales whole vectors.
MUL_TABLE = np.zeros((256, 256), dtype=np.uint8)
for _a in range(1, 256):
    for _b in range(1, 256):
        MUL_TABLE[_a, _b] = EXP[LOG[_a] + LOG[_b]]
del _a, _b

INV_TABLE = [0] + [EXP[255 - LOG[a]] for a in range(1, 256)]


def add(a: int, b: int) -> int:
    return a ^ b


def mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return EXP[LOG[a] + LOG[b]]


def inv(a: int) -> int:
    """Multiplicative inverse; zero has none."""
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return INV_TABLE[a]


def div(a: int, b: int) -> int:
    return mul(a, inv(b))


def scale(c: int, vec: np.ndarray) -> np.ndarray:
    """Multiply every byte of ``vec`` by the scalar ``c``."""
    return MUL_TABLE[c][vec]


def matvec(matrix: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``matrix @ x`` over GF(256); ``x`` may be 1-D or (cols, width)."""
    matrix = np.asarray(matrix, dtype=np.uint8)
    x = np.asarray(x, dtype=np.uint8)
    out = np.zeros((matrix.shape[0],) + x.shape[1:], dtype=np.uint8)
    for i in range(matrix.shape[0]):
        for j in range(matrix.shape[1]):
            c = int(matrix[i, j])
            if c:
                out[i] ^= MUL_TABLE[c][x[j]]
    return out


class InconsistentSystemError(ValueError):
    """Raised by :func:`solve` when no solution exists."""

    def __init__(self, rank: int) -> None:
        super().__init__(f"inconsistent linear system (rank {rank})")
        self.rank = rank


@dataclass(frozen=True)
class Solution:
    """Result of :func:`solve`.

    ``x`` holds one particular solution (free unknowns set to zero);
    ``determined[j]`` is True when unknown ``j`` takes the same value in every
    solution.
    """

    x: np.ndarray
    rank: int
    determined: np.ndarray

    @property
    def unique(self) -> bool:
        return bool(self.determined.all())


def _rref(aug: np.ndarray, ncols: int) -> list[int]:
    """In-place Gauss-Jordan on the first ``ncols`` columns; returns pivot columns."""
    rows = aug.shape[0]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == rows:
            break
        nz = np.nonzero(aug[r:, c])[0]
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            aug[[r, p]] = aug[[p, r]]
        aug[r] = MUL_TABLE[INV_TABLE[int(aug[r, c])]][aug[r]]
        col = aug[:, c].copy()
        col[r] = 0
        others = np.nonzero(col)[0]
        if others.size:
            aug[others] ^= MUL_TABLE[col[others][:, None], aug[r][None, :]]
        pivots.append(c)
        r += 1
    return pivots


def solve(system: np.ndarray | Sequence[Sequence[int]], rhs) -> Solution:
    """Solve ``system @ x = rhs`` over GF(256).

    ``rhs`` has one entry per row; entries may themselves be byte vectors
    (shape ``(rows, width)``), in which case ``x`` has shape ``(cols, width)``.
    Under-determined systems are fine: the returned :class:`Solution` says
    which unknowns are pinned down.
    """
    a = np.asarray(system, dtype=np.uint8)
    if a.ndim != 2:
        raise ValueError("system must be a 2-D matrix")
    b = np.asarray(rhs, dtype=np.uint8)
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"rhs has {b.shape[0]} rows, system has {a.shape[0]}")
    vector_rhs = b.ndim == 1
    b2 = b.reshape(b.shape[0], -1)
    rows, cols = a.shape
    aug = np.concatenate([a, b2], axis=1)
    pivots = _rref(aug, cols)
    rank = len(pivots)
    if rank < rows and aug[rank:, cols:].any():
        raise InconsistentSystemError(rank)

    pivot_set = set(pivots)
    free = [c for c in range(cols) if c not in pivot_set]
    determined = np.zeros(cols, dtype=bool)
    x = np.zeros((cols, b2.shape[1]), dtype=np.uint8)
    for i, c in enumerate(pivots):
        x[c] = aug[i, cols:]
        if not free or not aug[i, free].any():
            determined[c] = True
    if vector_rhs:
        x = x[:, 0]
    else:
        x = x.reshape((cols,) + b.shape[1:])
    return Solution(x=x, rank=rank, determined=determined)


def rank(system: np.ndarray | Sequence[Sequence[int]]) -> int:
    a = np.array(system, dtype=np.uint8)
    if a.size == 0:
        return 0
    return len(_rref(a, a.shape[1]))


def determined_unknowns(rows: Sequence[Sequence[int]], ncols: int) -> set[int]:
    """Indices of unknowns fixed by the homogeneous equations ``rows``.

    Pure-Python counterpart of :attr:`Solution.determined` for small integer
    matrices; ``rows`` is not modified.
    """
    m = [list(r) for r in rows]
    pivots: list[int] = []
    r = 0
    nrows = len(m)
    for c in range(ncols):
        if r == nrows:
            break
        p = next((i for i in range(r, nrows) if m[i][c]), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        row = m[r]
        lg = 255 - LOG[row[c]]
        m[r] = row = [EXP[LOG[v] + lg] if v else 0 for v in row]
        for i in range(nrows):
            f = m[i][c]
            if i != r and f:
                lf = LOG[f]
                m[i] = [v ^ EXP[LOG[w] + lf] if w else v for v, w in zip(m[i], row)]
        pivots.append(c)
        r += 1
    pivot_set = set(pivots)
    free = [c for c in range(ncols) if c not in pivot_set]
    return {c for i, c in enumerate(pivots) if not any(m[i][f] for f in free)}
