"""
Set partitions of [L] = {1,...,L}, the coarsening order, and the coefficient
recursion that turns a sum over a partition class of multi-indices into a
signed sum of products of block sums.

Order convention: nu ⪯ pi means nu is COARSER than (or equal to) pi, i.e. every
block of nu is a union of blocks of pi.
"""
from __future__ import annotations
from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import product
from math import prod
from typing import Callable, Dict, Iterable, Iterator, List, Sequence, Tuple

import numpy as np
from scipy.special import stirling2

from ..errors import ArgumentError, SizeLimitError

MAX_GROUND_SIZE = 12
BRUTEFORCE_LIMIT = 10**7
BRUTEFORCE_CHUNK = 2**16


@dataclass(frozen=True)
class SetPartition:
    blocks: Tuple[Tuple[int, ...], ...]
    ground_size: int

    def __post_init__(self):
        if self.ground_size < 1:
            raise ArgumentError(f"ground size must be positive, got {self.ground_size}")
        if any(len(b) == 0 for b in self.blocks):
            raise ArgumentError("partition blocks must be non-empty")
        elems = sorted(x for b in self.blocks for x in b)
        if elems != list(range(1, self.ground_size + 1)):
            raise ArgumentError(
                f"blocks {self.blocks} are not a partition of [1..{self.ground_size}]"
            )
        canonical = tuple(sorted((tuple(sorted(b)) for b in self.blocks), key=lambda b: b[0]))
        object.__setattr__(self, "blocks", canonical)

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], ground_size: int | None = None) -> "SetPartition":
        bl = tuple(tuple(b) for b in blocks)
        if ground_size is None:
            ground_size = max((x for b in bl for x in b), default=0)
        return cls(bl, ground_size)

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "SetPartition":
        """Partition whose blocks are the positions sharing a label (positions are 1-based)."""
        groups: Dict[int, List[int]] = {}
        for pos, lab in enumerate(labels, start=1):
            groups.setdefault(lab, []).append(pos)
        return cls(tuple(tuple(g) for g in groups.values()), len(labels))

    @classmethod
    def finest(cls, L: int) -> "SetPartition":
        return cls(tuple((x,) for x in range(1, L + 1)), L)

    @classmethod
    def coarsest(cls, L: int) -> "SetPartition":
        return cls((tuple(range(1, L + 1)),), L)

    @cached_property
    def labels(self) -> Tuple[int, ...]:
        """labels[l-1] is the index of the block holding l."""
        out = [0] * self.ground_size
        for k, block in enumerate(self.blocks):
            for x in block:
                out[x - 1] = k
        return tuple(out)

    @cached_property
    def block_sizes(self) -> Tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def merge(self, grouping: "SetPartition") -> "SetPartition":
        """Coarsen by merging this partition's blocks as `grouping` (a partition of the block indices) says."""
        if grouping.ground_size != len(self.blocks):
            raise ArgumentError(
                f"grouping acts on {grouping.ground_size} blocks, partition has {len(self.blocks)}"
            )
        merged = [sum((self.blocks[k - 1] for k in g), ()) for g in grouping.blocks]
        return SetPartition(tuple(merged), self.ground_size)

    def __len__(self) -> int:
        return len(self.blocks)

    def __str__(self) -> str:
        inner = ",".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks)
        return "{" + inner + "}"


@dataclass(frozen=True)
class MultiIndex:
    entries: Tuple[int, ...]
    alphabet_size: int

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(int(e) for e in self.entries))
        if not self.entries:
            raise ArgumentError("multi-index must have at least one entry")
        bad = [e for e in self.entries if not 1 <= e <= self.alphabet_size]
        if bad:
            raise ArgumentError(f"entries {bad} outside [1..{self.alphabet_size}]")

    def __len__(self) -> int:
        return len(self.entries)


def _check_ground_size(L: int):
    if not 1 <= L <= MAX_GROUND_SIZE:
        raise SizeLimitError(f"ground size L={L} outside 1..{MAX_GROUND_SIZE}")


def _restricted_growth(L: int) -> Iterator[Tuple[int, ...]]:
    labels = [0] * L

    def rec(pos: int, used: int) -> Iterator[Tuple[int, ...]]:
        if pos == L:
            yield tuple(labels)
            return
        for v in range(used + 1):
            labels[pos] = v
            yield from rec(pos + 1, max(used, v + 1))

    yield from rec(1, 1)


@lru_cache(maxsize=10)
def _partitions(L: int) -> Tuple[SetPartition, ...]:
    return tuple(SetPartition.from_labels(rgs) for rgs in _restricted_growth(L))


def enumerate_partitions(L: int) -> List[SetPartition]:
    """All partitions of [L] in canonical form; there are Bell(L) of them."""
    _check_ground_size(L)
    if L <= 9:
        return list(_partitions(L))
    return [SetPartition.from_labels(rgs) for rgs in _restricted_growth(L)]


def bell_number(L: int) -> int:
    return sum(int(stirling2(L, k, exact=True)) for k in range(1, L + 1))


def coarsens(nu: SetPartition, pi: SetPartition) -> bool:
    """True iff every block of nu is a union of blocks of pi (nu ⪯ pi)."""
    if nu.ground_size != pi.ground_size:
        raise ArgumentError(
            f"ground sizes differ: {nu.ground_size} vs {pi.ground_size}"
        )
    lab = nu.labels
    return all(len({lab[x - 1] for x in block}) == 1 for block in pi.blocks)


def strictly_coarsens(nu: SetPartition, pi: SetPartition) -> bool:
    return len(nu) < len(pi) and coarsens(nu, pi)


def partition_class(i: MultiIndex) -> SetPartition:
    """nu_i: the non-empty pre-image classes of the multi-index."""
    return SetPartition.from_labels(i.entries)


@lru_cache(maxsize=None)
def _stirling(n: int, k: int) -> int:
    return int(stirling2(n, k, exact=True))


@lru_cache(maxsize=None)
def _merge_coefficient(shape: Tuple[int, ...]) -> int:
    """
    c_{pi,nu} where nu merges pi's blocks in groups of sizes `shape`.

    The interval [nu, pi] is a product of partition lattices of the groups, so
    the recursion c_{pi,nu} = -sum_{nu ⪯ mu ≺ pi} c_{mu,nu} runs over the number
    of mu-blocks j_i inside each group, weighted by how many mu realise it.
    """
    if all(k == 1 for k in shape):
        return 1
    total = 0
    for js in product(*(range(1, k + 1) for k in shape)):
        if js == shape:
            continue
        weight = prod(_stirling(k, j) for k, j in zip(shape, js))
        total += weight * _merge_coefficient(tuple(sorted(js)))
    return -total


def merge_shape(nu: SetPartition, pi: SetPartition) -> Tuple[int, ...]:
    """Sorted counts of pi-blocks inside each nu-block (requires nu ⪯ pi)."""
    if not coarsens(nu, pi):
        raise ArgumentError(f"{nu} does not coarsen {pi}")
    counts = [0] * len(nu)
    lab = nu.labels
    for block in pi.blocks:
        counts[lab[block[0] - 1]] += 1
    return tuple(sorted(counts))


@dataclass(frozen=True)
class CoeffTable:
    """Integer coefficients c_{pi,nu} for all comparable pairs nu ⪯ pi of partitions of [L]."""
    ground_size: int

    def __post_init__(self):
        _check_ground_size(self.ground_size)

    def coefficient(self, pi: SetPartition, nu: SetPartition) -> int:
        if pi.ground_size != self.ground_size:
            raise ArgumentError(f"table is for L={self.ground_size}, got partition of {pi.ground_size}")
        return _merge_coefficient(merge_shape(nu, pi))

    def __getitem__(self, key: Tuple[SetPartition, SetPartition]) -> int:
        pi, nu = key
        return self.coefficient(pi, nu)

    def coarsenings(self, pi: SetPartition) -> List[Tuple[SetPartition, int]]:
        """Every nu ⪯ pi with its coefficient c_{pi,nu}."""
        return [(pi.merge(g), _merge_coefficient(tuple(sorted(g.block_sizes))))
                for g in enumerate_partitions(len(pi))]

    def entries(self) -> Dict[Tuple[SetPartition, SetPartition], int]:
        out: Dict[Tuple[SetPartition, SetPartition], int] = {}
        for pi in enumerate_partitions(self.ground_size):
            for nu, c in self.coarsenings(pi):
                out[(pi, nu)] = c
        return out

    def merged_blocks(self, pi: SetPartition) -> Iterator[Tuple[List[Tuple[int, ...]], int]]:
        """Blocks of every coarsening of pi, paired with its coefficient."""
        for g in enumerate_partitions(len(pi)):
            merged = [sum((pi.blocks[k - 1] for k in grp), ()) for grp in g.blocks]
            yield merged, _merge_coefficient(tuple(sorted(g.block_sizes)))


def coefficient_table(L: int) -> CoeffTable:
    _check_ground_size(L)
    return CoeffTable(L)


def _as_array(a, pi: SetPartition) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ArgumentError(f"expected a d×L array, got shape {arr.shape}")
    if arr.shape[1] != pi.ground_size:
        raise ArgumentError(f"array has {arr.shape[1]} columns, partition is of [{pi.ground_size}]")
    return arr


def class_sum_bruteforce(a, pi: SetPartition) -> float:
    """Sum over i in I_pi of prod_l a[i_l, l], by enumerating all d^L multi-indices in chunks."""
    arr = _as_array(a, pi)
    d, L = arr.shape
    total_indices = d ** L
    if total_indices > BRUTEFORCE_LIMIT:
        raise SizeLimitError(f"d^L = {d}^{L} exceeds {BRUTEFORCE_LIMIT}")
    lab = pi.labels
    pairs = [(l, m, lab[l] == lab[m]) for l in range(L) for m in range(l + 1, L)]
    cols = np.arange(L)[:, None]
    total = 0.0
    for lo in range(0, total_indices, BRUTEFORCE_CHUNK):
        flat = np.arange(lo, min(lo + BRUTEFORCE_CHUNK, total_indices))
        idx = np.stack(np.unravel_index(flat, (d,) * L))
        mask = np.ones(idx.shape[1], dtype=bool)
        for l, m, joined in pairs:
            same = idx[l] == idx[m]
            mask &= same if joined else ~same
        members = idx[:, mask]
        if members.shape[1]:
            total += float(np.prod(arr[members, cols], axis=0).sum())
    return total


def combine_block_sums(pi: SetPartition, table: CoeffTable, block_sum: Callable[[Tuple[int, ...]], float]) -> float:
    """sum_{nu ⪯ pi} c_{pi,nu} prod_{s in nu} block_sum(s)."""
    total = 0.0
    for blocks, c in table.merged_blocks(pi):
        total += c * prod(block_sum(s) for s in blocks)
    return total


def class_sum_fast(a, pi: SetPartition, table: CoeffTable) -> float:
    """Same sum as class_sum_bruteforce via sum_{nu ⪯ pi} c_{pi,nu} prod_{s in nu} A_s."""
    arr = _as_array(a, pi)
    if table.ground_size != pi.ground_size:
        raise ArgumentError(f"table is for L={table.ground_size}, partition is of [{pi.ground_size}]")
    constant = bool(np.all(arr == arr[:, :1]))
    cache: Dict[object, float] = {}

    def block_sum(block: Tuple[int, ...]) -> float:
        # constant columns: A_s depends on |s| only
        key = len(block) if constant else frozenset(block)
        if key not in cache:
            cols = arr[:, [l - 1 for l in block]]
            cache[key] = float(np.prod(cols, axis=1).sum())
        return cache[key]

    return combine_block_sums(pi, table, block_sum)
