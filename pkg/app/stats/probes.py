"""
Convergence probes: sweeps in d against the OU target, finite-dimensional
distribution comparisons over random weight vectors, tightness scaling and
the conditional increment check.
"""
from __future__ import annotations
import math
from dataclasses import dataclass, field
from typing import List, Literal, Sequence, Tuple

import numpy as np

from ..errors import ArgumentError
from ..models import DirectionVector, OUParams, PathEnsemble, TimeGrid, WalkParams
from ..moments.exact import (
    conditional_sq_increment, f_discrepancy, increment_tail_bound, psi_moment_exact, trivial_moment_bound,
)
from ..moments.gaussian import gamma_params, gaussian_abs_moment, ou_transition
from ..sim.seeding import derive_seed, stream
from ..sim.walks import make_direction, simulate_projection_paths, simulate_z_paths
from .distance import ks_distance, wilson_interval
from .moments import check_paths, sample_moment

Statistic = Literal["exact_mean", "exact_var", "f_discrepancy", "mean", "var", "ks"]
STATISTICS: Tuple[str, ...] = ("exact_mean", "exact_var", "f_discrepancy", "mean", "var", "ks")

FDD_KEY = 7
SWEEP_KEY = 11
VAR_FLOOR = 1e-12


@dataclass
class ConvergenceRow:
    d: int
    statistic: str
    observed: float
    target: float
    gap: float = field(init=False)

    def __post_init__(self):
        self.gap = abs(self.observed - self.target)


def _sweep_direction(d: int, u: float, kind: str, index: int, direction_seed: int) -> DirectionVector:
    return make_direction(kind, d, u=u, index=min(index, d), seed=direction_seed)


def convergence_sweep(d_list: Sequence[int], statistic: Statistic, t: float, u: float, n_paths: int,
                      master_seed: int, p: float = 0.5, kind: str = "flat_signed", index: int = 1,
                      direction_seed: int = 0, eta: int = 2, threads: int = 1) -> List[ConvergenceRow]:
    """
    One row per d. OU targets start from the realised y = <theta, 1>, which
    tends to u; exact statistics carry no sampling noise.
    """
    if statistic not in STATISTICS:
        raise ArgumentError(f"unknown sweep statistic {statistic!r}")
    ds = [int(d) for d in d_list]
    if not ds or any(b <= a for a, b in zip(ds, ds[1:])):
        raise ArgumentError(f"sweep dimensions must be non-empty and strictly increasing, got {ds}")
    if t <= 0:
        raise ArgumentError(f"sweep time must be positive, got {t}")

    rows: List[ConvergenceRow] = []
    for d in ds:
        params = WalkParams(d=d, p=p)
        grid = TimeGrid.build([t], params.delta)
        if statistic == "f_discrepancy":
            rows.append(ConvergenceRow(d, statistic, f_discrepancy(params, grid, (eta,)), 0.0))
            continue
        theta = _sweep_direction(d, u, kind, index, direction_seed)
        mean_t, var_t = ou_transition(OUParams(start=theta.start_projection), t)
        if statistic == "exact_mean":
            rows.append(ConvergenceRow(d, statistic, psi_moment_exact(params, grid, theta, [1.0], 1), mean_t))
        elif statistic == "exact_var":
            m1 = psi_moment_exact(params, grid, theta, [1.0], 1)
            m2 = psi_moment_exact(params, grid, theta, [1.0], 2)
            rows.append(ConvergenceRow(d, statistic, m2 - m1 ** 2, var_t))
        else:
            ens = simulate_projection_paths(params, theta, grid, n_paths,
                                            derive_seed(master_seed, SWEEP_KEY, d), threads)
            y = ens.values[:, grid.columns([t])[0]]
            if statistic == "mean":
                rows.append(ConvergenceRow(d, statistic, float(y.mean()), mean_t))
            elif statistic == "var":
                rows.append(ConvergenceRow(d, statistic, float(y.var(ddof=1)), var_t))
            else:
                rows.append(ConvergenceRow(d, statistic, ks_distance(y, mean_t, var_t), 0.0))
    return rows


def moment_bound_sweep(L: int, d_list: Sequence[int], t: float, u: float, p: float = 0.5,
                       kind: str = "flat_signed", index: int = 1,
                       direction_seed: int = 0) -> List[ConvergenceRow]:
    """|E Y_t^L| per d against twice the Gaussian absolute moment; a row passes when observed <= target."""
    rows = []
    for d in d_list:
        params = WalkParams(d=int(d), p=p)
        theta = _sweep_direction(int(d), u, kind, index, direction_seed)
        grid = TimeGrid.build([t], params.delta)
        mean_t, var_t = ou_transition(OUParams(start=theta.start_projection), t)
        observed = abs(psi_moment_exact(params, grid, theta, [1.0], L))
        rows.append(ConvergenceRow(int(d), f"abs_moment_{L}", observed, 2.0 * gaussian_abs_moment(mean_t, var_t, L)))
    return rows


def small_d_moment_bound(L: int, t: float, p: float = 0.5, direction_seed: int = 0) -> List[ConvergenceRow]:
    """|E Y_t^L| for d = 1..L against L^{L/2}, which holds there because |Y| <= sqrt(d)."""
    rows = []
    for d in range(1, L + 1):
        params = WalkParams(d=d, p=p)
        theta = make_direction("uniform_sphere", d, seed=direction_seed)
        grid = TimeGrid.build([t], params.delta)
        observed = abs(psi_moment_exact(params, grid, theta, [1.0], L))
        rows.append(ConvergenceRow(d, f"small_d_moment_{L}", observed, trivial_moment_bound(L)))
    return rows


# ----------------- finite-dimensional distributions -----------------
@dataclass
class FddRow:
    phi: Tuple[float, ...]
    target_mean: float
    target_var: float
    ks: float
    mean_z: float
    second_z: float


@dataclass
class FddReport:
    process: str
    n_paths: int
    rows: List[FddRow]

    @property
    def worst_ks(self) -> float:
        return max(r.ks for r in self.rows)

    @property
    def worst_z(self) -> float:
        return max(max(abs(r.mean_z), abs(r.second_z)) for r in self.rows)

    def passed(self, ks_pass: float = 0.05) -> bool:
        return self.worst_ks < ks_pass

    def counterexample(self, ks_fail: float = 0.3) -> bool:
        return self.worst_ks >= ks_fail


def fdd_compare(ensemble: PathEnsemble, draws: int, master_seed: int) -> FddReport:
    """
    Psi = sum_k phi_k Y_{t_k} for `draws` standard-normal weight vectors against
    the Gaussian law of Gamma for an OU started at the ensemble's start value.
    """
    check_paths(ensemble.n_paths)
    if draws < 1:
        raise ArgumentError(f"need at least one weight draw, got {draws}")
    grid = ensemble.grid
    times = grid.times[1:] if grid.K > 0 else grid.times
    rng = stream(master_seed, FDD_KEY, 0)
    rows = []
    for _ in range(draws):
        phi = rng.standard_normal(len(times))
        psi = ensemble.weighted(phi)
        mean, var = gamma_params(ensemble.start, times, phi)
        if var < VAR_FLOOR:
            ks = 0.0 if np.allclose(psi, mean, atol=1e-9) else 1.0
        else:
            ks = ks_distance(psi, mean, var)
        rows.append(FddRow(
            phi=tuple(float(x) for x in phi),
            target_mean=mean,
            target_var=var,
            ks=ks,
            mean_z=sample_moment(psi, 1, mean).z,
            second_z=sample_moment(psi, 2, mean ** 2 + var).z,
        ))
    return FddReport(ensemble.process, ensemble.n_paths, rows)


def fdd_test(params: WalkParams, theta: DirectionVector, grid: TimeGrid, draws: int, n_paths: int,
             master_seed: int, which: str = "X", threads: int = 1) -> FddReport:
    sampler = simulate_projection_paths if which == "X" else simulate_z_paths
    ensemble = sampler(params, theta, grid, n_paths, master_seed, threads)
    return fdd_compare(ensemble, draws, master_seed)


# ----------------- tightness -----------------
@dataclass
class TightnessWindow:
    times: Tuple[float, float, float]
    eps: float
    n_paths: int
    hits: int
    ci_low: float
    ci_high: float
    scale: float
    lattice_factor: float

    @property
    def probability(self) -> float:
        return self.hits / self.n_paths


@dataclass
class TightnessReport:
    full: TightnessWindow
    half: TightnessWindow

    @property
    def monotone(self) -> bool:
        """The halved window is not significantly more likely to see two large increments."""
        return self.half.ci_low <= self.full.ci_high


def _window(values: np.ndarray, grid: TimeGrid, times: Tuple[float, float, float], eps: float,
            delta: float) -> TightnessWindow:
    c1, c2, c3 = grid.columns(times)
    y1, y2, y3 = values[:, c1], values[:, c2], values[:, c3]
    hits = int(np.count_nonzero((np.abs(y3 - y2) >= eps) & (np.abs(y2 - y1) >= eps)))
    lo, hi = wilson_interval(hits, values.shape[0])
    n1, n2, n3 = (grid.pulse_counts[c] for c in (c1, c2, c3))
    return TightnessWindow(
        times=times, eps=eps, n_paths=values.shape[0], hits=hits, ci_low=lo, ci_high=hi,
        scale=(times[2] - times[0]) ** 1.5 / eps ** 3,
        lattice_factor=(n3 - n2) * math.sqrt(n2 - n1) * delta ** 1.5 / eps ** 3,
    )


def tightness_probe(params: WalkParams, theta: DirectionVector, times: Sequence[float], eps: float,
                    n_paths: int, master_seed: int, threads: int = 1) -> TightnessReport:
    """Joint large-increment probability on (t1, t2, t3) and on the window halved about t1, from coupled paths."""
    t1, t2, t3 = (float(t) for t in times)
    if not 0 <= t1 < t2 < t3:
        raise ArgumentError(f"tightness times must satisfy 0 <= t1 < t2 < t3, got {tuple(times)}")
    if eps <= 0:
        raise ArgumentError(f"eps must be positive, got {eps}")
    half = (t1, t1 + (t2 - t1) / 2, t1 + (t3 - t1) / 2)
    grid = TimeGrid.build(sorted({t1, t2, t3, *half}), params.delta)
    ens = simulate_projection_paths(params, theta, grid, n_paths, master_seed, threads)
    return TightnessReport(
        full=_window(ens.values, grid, (t1, t2, t3), eps, params.delta),
        half=_window(ens.values, grid, half, eps, params.delta),
    )


# ----------------- conditional increments -----------------
@dataclass
class IncrementBin:
    lo: float
    hi: float
    count: int
    empirical: float
    exact: float
    std_error: float
    tail: float = 0.0
    tail_ci_low: float = 0.0
    tail_ci_high: float = 1.0
    tail_bound: float = 1.0

    @property
    def z(self) -> float:
        gap = self.empirical - self.exact
        if self.std_error > 0:
            return gap / self.std_error
        return 0.0 if abs(gap) <= 1e-12 else math.copysign(math.inf, gap)

    @property
    def tail_holds(self) -> bool:
        return self.tail_ci_low <= self.tail_bound


@dataclass
class IncrementReport:
    pulses: int
    delta: float
    bins: List[IncrementBin]
    bound_holds: bool

    def passed(self, z_max: float = 4.0) -> bool:
        return self.bound_holds and all(abs(b.z) <= z_max and b.tail_holds for b in self.bins)


def conditional_increment_check(params: WalkParams, theta: DirectionVector, t1: float, t2: float,
                                n_paths: int, master_seed: int, bins: int = 8,
                                threads: int = 1, eps: float = 0.5) -> IncrementReport:
    """
    Squared increments Y_{t2} - Y_{t1} binned on quantiles of Y_{t1}; each bin's
    mean residual against the exact conditional second moment should be
    within a few standard errors of zero. The share of |increment| >= eps in a
    bin must not sit above the mean Chebyshev bound for that bin.
    """
    if not 0 <= t1 < t2:
        raise ArgumentError(f"need 0 <= t1 < t2, got ({t1}, {t2})")
    grid = TimeGrid.build([t1, t2], params.delta)
    c1, c2 = grid.columns([t1, t2])
    m = grid.pulse_counts[c2] - grid.pulse_counts[c1]
    ens = simulate_projection_paths(params, theta, grid, n_paths, master_seed, threads)
    y1, y2 = ens.values[:, c1], ens.values[:, c2]
    sq = (y2 - y1) ** 2
    exact = conditional_sq_increment(y1, m, params.delta)
    big = np.abs(y2 - y1) >= eps
    tail_bound = increment_tail_bound(y1, m, params.delta, eps)

    edges = np.unique(np.quantile(y1, np.linspace(0.0, 1.0, bins + 1)))
    which = np.searchsorted(edges[1:-1], y1, side="right")
    out: List[IncrementBin] = []
    for b in range(len(edges) - 1 if len(edges) > 1 else 1):
        mask = which == b
        n = int(mask.sum())
        if n < 2:
            continue
        resid = sq[mask] - exact[mask]
        hits = int(big[mask].sum())
        ci = wilson_interval(hits, n)
        out.append(IncrementBin(
            lo=float(edges[b]), hi=float(edges[min(b + 1, len(edges) - 1)]), count=n,
            empirical=float(sq[mask].mean()), exact=float(exact[mask].mean()),
            std_error=float(resid.std(ddof=1) / math.sqrt(n)),
            tail=hits / n, tail_ci_low=ci[0], tail_ci_high=ci[1], tail_bound=float(tail_bound[mask].mean()),
        ))

    ys = np.concatenate([np.unique(y1), np.linspace(-theta.l1_norm, theta.l1_norm, 201)])
    closed = conditional_sq_increment(ys, m, params.delta)
    bound_holds = bool(np.all(closed <= 2.0 * m * params.delta * (1.0 + 2.0 * ys ** 2) + 1e-12))
    return IncrementReport(m, params.delta, out, bound_holds)
