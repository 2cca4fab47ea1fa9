"""
Moment verification suites: closed forms against the exact 2^d-state chain,
the multinomial representation against the chain law, and Monte Carlo
moments against the exact engine.
"""
from __future__ import annotations
from dataclasses import dataclass
from math import comb
from itertools import combinations_with_replacement, product
from typing import Iterator, List, Optional, Sequence, Tuple

from ..models import DirectionVector, TimeGrid, WalkParams
from ..moments.exact import (
    MultiIndexSplit, eta_profile, exact_moment_X, exact_moment_Z, psi_moment_exact,
)
from ..sim.chain import (
    chain_moment, chain_psi_moment, counts_representation_law, pushforward, total_variation,
    x_coordinate_law, z_coordinate_law,
)
from ..sim.walks import make_direction, simulate_projection_paths, simulate_z_paths
from ..stats.moments import MomentReport, empirical_moment

ORACLE_TOL = 1e-10
LAW_TOL = 1e-12


@dataclass
class CheckRow:
    suite: str
    case: str
    observed: float
    expected: float
    tolerance: float

    @property
    def error(self) -> float:
        return abs(self.observed - self.expected)

    @property
    def passed(self) -> bool:
        return self.error <= self.tolerance


def pulse_grids(max_pulses: int, max_segments: int, delta: float) -> Iterator[TimeGrid]:
    for K in range(1, max_segments + 1):
        for counts in combinations_with_replacement(range(max_pulses + 1), K):
            yield TimeGrid.from_pulse_counts(counts, delta)


def splits(d: int, L: int, K: int) -> Iterator[MultiIndexSplit]:
    lengths = [c for c in product(range(L + 1), repeat=K) if sum(c) == L]
    for entries in product(range(1, d + 1), repeat=L):
        for ls in lengths:
            yield MultiIndexSplit.of(entries, ls, d)


def chain_oracle(ds: Sequence[int] = (2, 3, 4), ps: Sequence[float] = (0.5, 1.0), max_pulses: int = 4,
                 max_segments: int = 2, max_order: int = 3) -> List[CheckRow]:
    """Closed-form joint moments against forward propagation through the transition matrix."""
    rows = []
    for d, p in product(ds, ps):
        params = WalkParams(d=d, p=p)
        worst: Optional[CheckRow] = None
        agree_worst: Optional[CheckRow] = None
        for grid in pulse_grids(max_pulses, max_segments, params.delta):
            for L in range(1, max_order + 1):
                for split in splits(d, L, grid.K):
                    case = f"d={d} p={p} n={grid.pulse_counts[1:]} i={split.index.entries} l={split.segment_lengths}"
                    row = CheckRow("chain", case, exact_moment_X(params, grid, split),
                                   chain_moment(params, grid, split), ORACLE_TOL)
                    if worst is None or row.error > worst.error:
                        worst = row
                    if max(eta_profile(split)) <= 1:
                        agree = CheckRow("x_equals_z", case, exact_moment_Z(params, grid, split),
                                         row.observed, ORACLE_TOL)
                        if agree_worst is None or agree.error > agree_worst.error:
                            agree_worst = agree
        rows += [r for r in (worst, agree_worst) if r is not None]
    return rows


def psi_oracle(d: int = 2, ps: Sequence[float] = (0.5, 1.0), max_order: int = 3,
               times: Sequence[float] = (0.5, 1.0), phi: Sequence[float] = (0.7, -1.3)) -> List[CheckRow]:
    rows = []
    theta = make_direction("uniform_sphere", d, seed=d)
    for p in ps:
        params = WalkParams(d=d, p=p)
        grid = TimeGrid.build(times, params.delta)
        for L in range(1, max_order + 1):
            rows.append(CheckRow("psi_chain", f"d={d} p={p} L={L}",
                                 psi_moment_exact(params, grid, theta, phi, L),
                                 chain_psi_moment(params, grid, theta, phi, L), ORACLE_TOL))
    return rows


def representation_check(d: int = 2, ps: Sequence[float] = (0.5, 1.0), max_pulses: int = 4) -> List[CheckRow]:
    """Total variation between the multinomial representation and the chain law, plus coordinate marginals of X and Z."""
    rows = []
    for p in ps:
        params = WalkParams(d=d, p=p)
        for n in range(max_pulses + 1):
            tv = total_variation(counts_representation_law(params, n), pushforward(params, n))
            rows.append(CheckRow("representation", f"d={d} p={p} n={n}", tv, 0.0, LAW_TOL))
            rows.append(CheckRow("marginal", f"d={d} p={p} n={n}", z_coordinate_law(params, n),
                                 x_coordinate_law(params, n), LAW_TOL))
    return rows


def mc_consistency(params: WalkParams, theta: DirectionVector, times: Sequence[float],
                   weights: Optional[Sequence[float]], n_paths: int, master_seed: int, lmax: int = 4,
                   which: str = "X", threads: int = 1) -> Tuple[List[MomentReport], str]:
    """Empirical E Psi^L for L = 1..lmax against the exact engine on the same grid."""
    grid = TimeGrid.build(times, params.delta)
    sampler = simulate_projection_paths if which == "X" else simulate_z_paths
    ensemble = sampler(params, theta, grid, n_paths, master_seed, threads)
    if weights is None:
        weights = [1.0] * grid.K if grid.K else [1.0]
    weights = [float(w) for w in weights]
    # a t_0 weight multiplies the deterministic start
    head, phi = (weights[0], weights[1:]) if len(weights) == grid.K + 1 else (0.0, weights)
    reports = []
    for L in range(1, lmax + 1):
        exact = _shifted_moment(params, grid, theta, phi, L, head * theta.start_projection, which)
        reports.append(empirical_moment(ensemble, weights, L, exact))
    return reports, f"d={params.d} N={n_paths} times={tuple(grid.times[1:])} phi={tuple(phi)}"


def _shifted_moment(params: WalkParams, grid: TimeGrid, theta: DirectionVector, phi: Sequence[float],
                    L: int, shift: float, which: str) -> float:
    """E (shift + Psi)^L by the binomial expansion."""
    total = shift ** L
    if not phi:
        return total
    for j in range(1, L + 1):
        total += comb(L, j) * shift ** (L - j) * psi_moment_exact(params, grid, theta, phi, j, which)
    return total
