"""Conservative (B, N) estimation from the observed erasure pattern.

:class:`BNEstimator` is the single-instance estimator: on each received packet
it scans the length-(T+1) windows ending at every channel use since the last
receipt and picks the highest-capacity (B, N) that keeps every observed
correctable window correctable. Its rate can only decrease, so
:class:`InterleavedEstimator` runs staggered instances that each live 2L uses
and reports from the one in the second half of its life.
"""

from __future__ import annotations

from functools import lru_cache
from fractions import Fraction
from typing import Callable

from .blockcode import capacity_of, wt_span

__all__ = ["BNEstimator", "InterleavedEstimator", "wt_span", "window_wt_span"]


@lru_cache(maxsize=None)
def _cap(T: int, B: int, N: int) -> Fraction:
    return capacity_of(T, B, N)


def window_wt_span(mask: int) -> tuple[int, int]:
    """Weight and span of a window given as a bitmask of erased positions."""
    if not mask:
        return 0, 0
    low = (mask & -mask).bit_length()
    return mask.bit_count(), mask.bit_length() - low + 1


class BNEstimator:
    """One estimator instance whose history starts at channel use ``start``.

    Channel uses before ``start`` count as unerased. ``B``, ``N`` are the
    committed estimates and never decrease.
    """

    def __init__(self, T: int, start: int = 0) -> None:
        self.T = T
        self.start = start
        self.previous_seq = start - 1
        self.B = 0
        self.N = 0
        self.n_max = 0

    @property
    def estimate(self) -> tuple[int, int]:
        return self.B, self.N

    def step(self, wt: int, span: int) -> tuple[int, int]:
        """Advance one channel use whose window has the given weight and span."""
        T = self.T
        b_bar = max(span, self.B)
        n_bar = max(wt, self.N)
        self.n_max = max(wt, self.n_max)
        if n_bar == 0 or n_bar == T + 1:
            return self.B, self.N
        n_b = max(self.N, 1)
        r_b = Fraction(0) if b_bar == T + 1 else _cap(T, b_bar, n_b)
        b_n = max(self.B, n_bar)
        r_n = _cap(T, b_n, n_bar)
        # an all-ones window pushes n_max to T + 1, which no code reaches
        r_mds = Fraction(0) if self.n_max == T + 1 else _cap(T, self.n_max, self.n_max)
        best = max(r_b, r_n, r_mds)
        if r_b == best:
            self.B, self.N = b_bar, n_b
        elif r_n == best:
            self.B, self.N = b_n, n_bar
        else:
            self.B = self.N = self.n_max
        return self.B, self.N

    def on_receipt(self, i: int, erased: Callable[[int], bool]) -> list[tuple[int, int, int]]:
        """Process receipt of packet ``i``; returns ``(j, B, N)`` for each new use ``j``."""
        if i <= self.previous_seq:
            raise ValueError(f"receipt {i} not after previous {self.previous_seq}")
        out = []
        for j in range(self.previous_seq + 1, i + 1):
            bits = [x >= self.start and erased(x) for x in range(j - self.T, j + 1)]
            out.append((j, *self.step(*wt_span(bits))))
        self.previous_seq = i
        return out


class InterleavedEstimator:
    """Network-adaptive wrapper: a fresh :class:`BNEstimator` every L uses.

    Instance ``l`` starts at channel use ``l`` (a multiple of L), sees only
    erasures from ``l`` on, and supplies the output for uses
    ``l + L <= j < l + 2L``. Before use L nothing qualifies and the output
    is (0, 0).

    Feed receipts in increasing order; uses skipped between receipts are
    erasures.
    """

    def __init__(self, T: int, L: int) -> None:
        if L < 1:
            raise ValueError("L must be positive")
        self.T = T
        self.L = L
        self.instances: dict[int, BNEstimator] = {}
        self.last = -1
        self._mask = 0  # bit x set: use (last - x) erased
        self.output = (0, 0)

    def _advance(self, j: int, erased: bool) -> None:
        self._mask = ((self._mask << 1) | int(erased)) & ((1 << (self.T + 1)) - 1)
        self.last = j
        if j % self.L == 0:
            self.instances[j] = BNEstimator(self.T, j)
        for start in [s for s in self.instances if s + 2 * self.L <= j]:
            del self.instances[start]
        for start, inst in self.instances.items():
            # drop positions before the instance start
            m = self._mask & ((1 << (j - start + 1)) - 1) if j - start < self.T else self._mask
            inst.step(*window_wt_span(m))
            inst.previous_seq = j
        owner = self.instances.get(j // self.L * self.L - self.L)
        self.output = owner.estimate if owner is not None else (0, 0)

    def on_receipt(self, i: int) -> tuple[int, int]:
        """Process receipt of packet ``i``; returns the estimate emitted at use ``i``."""
        if i <= self.last:
            raise ValueError(f"receipt {i} not after previous {self.last}")
        for j in range(self.last + 1, i):
            self._advance(j, True)
        self._advance(i, False)
        return self.output
