"""
Exact finite-d moments of the projected walk Y = <theta, X> and of the
independent-coordinate process Z, both started from (1,...,1).

For a multi-index split over K segments, with eta_k the number of coordinates
of odd multiplicity in the tail from segment k on,

    E prod X = prod_k (1 - eta_k delta)^(n_k - n_{k-1})
    E prod Z = prod_k (1 - delta)^(eta_k (n_k - n_{k-1}))
"""
from __future__ import annotations
import math
from collections import Counter
from dataclasses import dataclass
from itertools import product
from typing import Dict, Literal, Sequence, Tuple

import numpy as np

from ..combinatorics.partitions import (
    CoeffTable, MultiIndex, SetPartition, coefficient_table, combine_block_sums, enumerate_partitions,
)
from ..errors import ArgumentError, SizeLimitError
from ..models import MAX_GRID_SEGMENTS, DirectionVector, TimeGrid, WalkParams

MAX_PSI_ORDER = 8
MAX_PSI_SEGMENTS = MAX_GRID_SEGMENTS
LOG_SPACE_THRESHOLD = 1000

Which = Literal["X", "Z"]


def _tail_starts(lengths: Sequence[int]) -> Tuple[int, ...]:
    """0-based position L_{k-1} where the tail of segment k begins."""
    starts, acc = [], 0
    for x in lengths:
        starts.append(acc)
        acc += x
    return tuple(starts)


@dataclass(frozen=True)
class MultiIndexSplit:
    """A multi-index cut into K consecutive segments; segment k holds the factors observed at t_k."""
    index: MultiIndex
    segment_lengths: Tuple[int, ...]

    def __post_init__(self):
        lengths = tuple(int(x) for x in self.segment_lengths)
        object.__setattr__(self, "segment_lengths", lengths)
        if not lengths or any(x < 0 for x in lengths):
            raise ArgumentError(f"segment lengths must be non-negative, got {lengths}")
        if sum(lengths) != len(self.index):
            raise ArgumentError(f"segment lengths {lengths} do not sum to L={len(self.index)}")

    @classmethod
    def of(cls, entries: Sequence[int], lengths: Sequence[int], d: int) -> "MultiIndexSplit":
        return cls(MultiIndex(tuple(entries), d), tuple(lengths))

    @property
    def K(self) -> int:
        return len(self.segment_lengths)

    @property
    def tail_starts(self) -> Tuple[int, ...]:
        return _tail_starts(self.segment_lengths)


def eta_profile(split: MultiIndexSplit) -> Tuple[int, ...]:
    entries = split.index.entries
    out = []
    for start in split.tail_starts:
        counts = Counter(entries[start:])
        out.append(sum(1 for c in counts.values() if c % 2))
    return tuple(out)


def _power(base: float, n: int) -> float:
    """base**n; large n goes through log1p with the sign handled apart."""
    if n == 0:
        return 1.0
    if n <= LOG_SPACE_THRESHOLD or base == 0.0:
        return base ** n
    sign = -1.0 if (base < 0 and n % 2) else 1.0
    return sign * math.exp(n * math.log1p(abs(base) - 1.0))


def _x_product(delta: float, eta: Sequence[int], segments: Sequence[int]) -> float:
    return math.prod(_power(1.0 - e * delta, m) for e, m in zip(eta, segments))


def _z_product(delta: float, eta: Sequence[int], segments: Sequence[int]) -> float:
    return math.prod(_power(1.0 - delta, e * m) for e, m in zip(eta, segments))


def _segments(params: WalkParams, grid: TimeGrid, K: int) -> Tuple[int, ...]:
    grid = grid.aligned_to(params.delta)
    if grid.K != K:
        raise ArgumentError(f"{K} segments for a grid with K={grid.K}")
    return grid.segment_pulses


def exact_moment_X(params: WalkParams, grid: TimeGrid, split: MultiIndexSplit) -> float:
    if split.index.alphabet_size != params.d:
        raise ArgumentError(f"multi-index over [1..{split.index.alphabet_size}], walk has d={params.d}")
    return _x_product(params.delta, eta_profile(split), _segments(params, grid, split.K))


def exact_moment_Z(params: WalkParams, grid: TimeGrid, split: MultiIndexSplit) -> float:
    if split.index.alphabet_size != params.d:
        raise ArgumentError(f"multi-index over [1..{split.index.alphabet_size}], walk has d={params.d}")
    return _z_product(params.delta, eta_profile(split), _segments(params, grid, split.K))


def f_discrepancy(params: WalkParams, grid: TimeGrid, eta: Sequence[int]) -> float:
    segments = _segments(params, grid, len(eta))
    return _x_product(params.delta, eta, segments) - _z_product(params.delta, eta, segments)


def class_sums_constant(theta: DirectionVector, L: int, table: CoeffTable) -> Dict[SetPartition, float]:
    """
    sum_{i in I_pi} prod_l theta_{i_l} for every partition pi of [L].

    With constant columns every block sum is a power sum of theta, so the class
    sum depends on pi only through its block sizes.
    """
    if table.ground_size != L:
        raise ArgumentError(f"table is for L={table.ground_size}, asked for L={L}")
    powers = {j: float(np.sum(theta.coords ** j)) for j in range(1, L + 1)}
    by_shape: Dict[Tuple[int, ...], float] = {}
    out: Dict[SetPartition, float] = {}
    for pi in enumerate_partitions(L):
        shape = tuple(sorted(pi.block_sizes))
        if shape not in by_shape:
            by_shape[shape] = combine_block_sums(pi, table, lambda s: powers[len(s)])
        out[pi] = by_shape[shape]
    return out


def _tail_parities(pi: SetPartition, starts: Sequence[int]) -> Tuple[int, ...]:
    """eta_k for any i in I_pi: blocks of pi with an odd number of positions past L_{k-1}."""
    return tuple(sum(1 for b in pi.blocks if sum(1 for x in b if x > s) % 2) for s in starts)


def psi_moment_exact(params: WalkParams, grid: TimeGrid, theta: DirectionVector, phi: Sequence[float],
                     L: int, which: Which = "X", table: CoeffTable | None = None) -> float:
    """
    E (sum_k phi_k Y_{t_k})^L, or the same for <theta, Z> when which="Z".

    Each ordered assignment of the L factors to grid times is sorted into a
    segment composition; the moment for a composition is summed over partition
    classes, grouped by their eta profile.
    """
    if not 1 <= L <= MAX_PSI_ORDER:
        raise SizeLimitError(f"exact Psi moments need 1 <= L <= {MAX_PSI_ORDER}, got L={L}")
    if theta.d != params.d:
        raise ArgumentError(f"direction has d={theta.d}, walk has d={params.d}")
    grid = grid.aligned_to(params.delta)
    K = grid.K
    if not 1 <= K <= MAX_PSI_SEGMENTS:
        raise SizeLimitError(f"exact Psi moments need 1 <= K <= {MAX_PSI_SEGMENTS}, got K={K}")
    if len(phi) != K:
        raise ArgumentError(f"{len(phi)} weights for a grid with K={K}")
    if which not in ("X", "Z"):
        raise ArgumentError(f"which must be 'X' or 'Z', got {which!r}")

    table = table or coefficient_table(L)
    sums = class_sums_constant(theta, L, table)
    segments = grid.segment_pulses
    moment_of = _x_product if which == "X" else _z_product

    weights: Dict[Tuple[int, ...], float] = {}
    for assignment in product(range(K), repeat=L):
        lengths = tuple(assignment.count(k) for k in range(K))
        weights[lengths] = weights.get(lengths, 0.0) + math.prod(phi[k] for k in assignment)

    total = 0.0
    for lengths, w in weights.items():
        if w == 0.0:
            continue
        starts = _tail_starts(lengths)
        grouped: Dict[Tuple[int, ...], float] = {}
        for pi, s in sums.items():
            eta = _tail_parities(pi, starts)
            grouped[eta] = grouped.get(eta, 0.0) + s
        total += w * sum(s * moment_of(params.delta, eta, segments) for eta, s in grouped.items())
    return total


def conditional_sq_increment(y1, m: int, delta: float):
    """E[(Y_{t_2} - Y_{t_1})^2 | Y_{t_1} = y1] after m pulses; y1 may be an array."""
    if m < 0:
        raise ArgumentError(f"pulse count must be non-negative, got {m}")
    if not 0.0 < delta <= 1.0:
        raise ArgumentError(f"delta must lie in (0, 1], got {delta}")
    a = _power(1.0 - 2.0 * delta, m)
    b = _power(1.0 - delta, m)
    y1 = np.asarray(y1, dtype=float)
    out = 1.0 - a + y1 ** 2 * (a - 2.0 * b + 1.0)
    return float(out) if out.ndim == 0 else out


def increment_tail_bound(y1, m: int, delta: float, eps: float):
    """Chebyshev bound min(1, 4 m delta (1 + y1^2) / eps^2) on P(|Y_{t_2} - Y_{t_1}| >= eps | Y_{t_1})."""
    if eps <= 0:
        raise ArgumentError(f"eps must be positive, got {eps}")
    if m < 0:
        raise ArgumentError(f"pulse count must be non-negative, got {m}")
    y1 = np.asarray(y1, dtype=float)
    out = np.minimum(1.0, 4.0 * m * delta * (1.0 + y1 ** 2) / eps ** 2)
    return float(out) if out.ndim == 0 else out


def trivial_moment_bound(L: int) -> float:
    """|E Y^L| <= L^{L/2} whenever d <= L, since |Y| <= sqrt(d)."""
    if L < 1:
        raise ArgumentError(f"moment order must be positive, got {L}")
    return float(L) ** (L / 2.0)
