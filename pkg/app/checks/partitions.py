from __future__ import annotations
from dataclasses import dataclass, field
from math import perm
from typing import List, Optional

import numpy as np

from ..combinatorics.partitions import (
    BRUTEFORCE_LIMIT, CoeffTable, SetPartition, bell_number, class_sum_bruteforce, class_sum_fast,
    coarsens, coefficient_table, enumerate_partitions,
)
from ..sim.seeding import stream

REL_TOL = 1e-9
COLUMN_SUM_MAX_L = 6
RANDOM_ARRAYS = 20
MAX_D = 6


@dataclass
class SuiteRow:
    L: int
    checks: int = 0
    failures: int = 0
    first_failure: Optional[str] = None
    notes: List[str] = field(default_factory=list)

    def record(self, ok: bool, what: str):
        self.checks += 1
        if not ok:
            self.failures += 1
            if self.first_failure is None:
                self.first_failure = what

    @property
    def passed(self) -> bool:
        return self.failures == 0


def column_sum(table: CoeffTable, pi: SetPartition, nu: SetPartition) -> int:
    """sum of c_{mu,nu} over nu ⪯ mu ⪯ pi."""
    return sum(table.coefficient(mu, nu) for mu, _ in table.coarsenings(pi) if coarsens(nu, mu))


def _check_table(row: SuiteRow, L: int, table: CoeffTable, partitions: List[SetPartition]):
    for pi in partitions:
        row.record(table.coefficient(pi, pi) == 1, f"L={L} c_(pi,pi) != 1 at pi={pi}")
        if L > COLUMN_SUM_MAX_L:
            continue
        between = table.coarsenings(pi)
        for nu, _ in between:
            if len(nu) < len(pi):
                total = sum(table.coefficient(mu, nu) for mu, _ in between if coarsens(nu, mu))
                row.record(total == 0, f"L={L} column sum != 0 at pi={pi} nu={nu}")


def _check_class_sums(row: SuiteRow, L: int, table: CoeffTable, partitions: List[SetPartition], seed: int):
    for d in range(1, MAX_D + 1):
        if d ** L > BRUTEFORCE_LIMIT // 100:
            break
        ones = np.ones((d, L))
        total = sum(class_sum_fast(ones, pi, table) for pi in partitions)
        row.record(total == d ** L, f"L={L} d={d} class sums of ones total {total}, expected {d ** L}")
        for pi in partitions:
            size = class_sum_bruteforce(ones, pi)
            row.record(size == perm(d, len(pi)), f"L={L} d={d} |I_pi| = {size} at pi={pi}")
        arrays = RANDOM_ARRAYS if L <= 4 else 2
        rng = stream(seed, L, d)
        for draw in range(arrays):
            a = rng.standard_normal((d, L))
            for pi in partitions:
                brute = class_sum_bruteforce(a, pi)
                fast = class_sum_fast(a, pi, table)
                row.record(abs(fast - brute) <= REL_TOL * (1.0 + abs(brute)),
                           f"L={L} d={d} pi={pi} seed={seed} draw={draw}: fast {fast!r} vs brute {brute!r}")


def run_partition_suite(lmax: int, seed: int) -> List[SuiteRow]:
    """Enumeration counts, coefficient invariants and fast-vs-brute class sums for L = 1..lmax."""
    rows = []
    for L in range(1, lmax + 1):
        row = SuiteRow(L)
        partitions = enumerate_partitions(L)
        row.record(len(partitions) == bell_number(L), f"L={L}: {len(partitions)} partitions, Bell={bell_number(L)}")
        row.record(len(set(partitions)) == len(partitions), f"L={L}: duplicate partitions")
        table = coefficient_table(L)
        _check_table(row, L, table, partitions)
        if L <= COLUMN_SUM_MAX_L:
            _check_class_sums(row, L, table, partitions, seed)
        else:
            row.notes.append(f"class sums skipped above L={COLUMN_SUM_MAX_L}")
        rows.append(row)
    return rows
