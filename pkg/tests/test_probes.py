import math

import numpy as np
import pytest

from app.errors import ArgumentError, DegenerateEnsembleError
from app.models import OUParams, PathEnsemble, TimeGrid, WalkParams
from app.sim.diffusions import simulate_ou_paths
from app.sim.walks import make_direction
from app.stats.probes import (
    conditional_increment_check, convergence_sweep, fdd_compare, fdd_test, moment_bound_sweep, small_d_moment_bound,
    tightness_probe,
)

DS = [10, 100, 1000, 10_000]


def test_exact_mean_gap_shrinks():
    rows = convergence_sweep(DS, "exact_mean", 1.0, 1.0, n_paths=1000, master_seed=0)
    gaps = [r.gap for r in rows]
    assert [r.d for r in rows] == DS
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3
    assert gaps[0] == pytest.approx(0.0243, abs=5e-4)


def test_exact_var_and_f_discrepancy_rows():
    var_rows = convergence_sweep(DS, "exact_var", 1.0, 0.0, n_paths=1000, master_seed=0)
    assert var_rows[-1].target == pytest.approx(1 - math.exp(-2))
    assert var_rows[-1].gap < 1e-3
    f_rows = convergence_sweep(DS, "f_discrepancy", 1.0, 0.0, n_paths=1000, master_seed=0)
    assert all(r.target == 0.0 for r in f_rows)
    assert f_rows[0].observed == pytest.approx(0.8 ** 10 - 0.9 ** 20, abs=1e-12)
    assert all(b.gap < a.gap for a, b in zip(f_rows, f_rows[1:]))


def test_zero_start_has_no_mean_gap():
    rows = convergence_sweep(DS[:3], "exact_mean", 1.0, 0.0, n_paths=1000, master_seed=0)
    assert all(r.gap < 1e-14 for r in rows)


def test_sweep_guards():
    with pytest.raises(ArgumentError):
        convergence_sweep([], "exact_mean", 1.0, 0.0, 1000, 0)
    with pytest.raises(ArgumentError):
        convergence_sweep([100, 10], "exact_mean", 1.0, 0.0, 1000, 0)
    with pytest.raises(ArgumentError):
        convergence_sweep([10], "exact_mean", 0.0, 0.0, 1000, 0)
    with pytest.raises(ArgumentError):
        convergence_sweep([10], "median", 1.0, 0.0, 1000, 0)


def test_monte_carlo_sweep_statistics():
    rows = convergence_sweep([20, 200], "mean", 1.0, 1.0, n_paths=4000, master_seed=5)
    assert [r.statistic for r in rows] == ["mean", "mean"]
    assert all(r.gap < 0.1 for r in rows)
    again = convergence_sweep([20, 200], "mean", 1.0, 1.0, n_paths=4000, master_seed=5, threads=3)
    assert [r.observed for r in rows] == [r.observed for r in again]


def test_ks_sweep_flags_basis_direction():
    rows = convergence_sweep([100], "ks", 1.0, 0.0, n_paths=2000, master_seed=1, kind="basis", index=1)
    assert rows[0].observed >= 0.3


def test_moment_bound_rows_hold():
    for L in (2, 4):
        rows = moment_bound_sweep(L, [10, 100, 1000], 1.0, 1.0)
        assert all(r.observed <= r.target for r in rows)
        assert rows[0].statistic == f"abs_moment_{L}"


def test_small_d_moments_under_trivial_bound():
    rows = small_d_moment_bound(4, 0.5, direction_seed=3)
    assert [r.d for r in rows] == [1, 2, 3, 4]
    assert all(r.target == 16.0 for r in rows)
    assert all(r.observed <= r.target for r in rows)
    # d = 1 keeps Y in {-1, +1}
    assert rows[0].observed == pytest.approx(1.0, abs=1e-12)


def test_fdd_passes_for_ou_ensemble():
    ens = simulate_ou_paths(OUParams(start=0.5), TimeGrid.build([0.5, 1.0]), 20_000, master_seed=3)
    report = fdd_compare(ens, draws=8, master_seed=3)
    assert len(report.rows) == 8
    assert report.passed(0.05)
    assert not report.counterexample(0.3)
    assert report.worst_z < 5.0


def test_fdd_flags_basis_direction():
    params = WalkParams(d=200)
    theta = make_direction("basis", 200, index=1)
    report = fdd_test(params, theta, TimeGrid.build([1.0], params.delta), draws=4, n_paths=2000, master_seed=9)
    assert report.process == "lnnrw"
    assert report.counterexample(0.3)
    assert not report.passed(0.05)


def test_fdd_point_mass_at_time_zero():
    grid = TimeGrid.build([0.0])
    ens = PathEnsemble(grid, np.full((200, 1), 0.7), master_seed=0, start=0.7)
    report = fdd_compare(ens, draws=3, master_seed=0)
    assert report.worst_ks == 0.0
    assert report.worst_z == 0.0


def test_fdd_guards():
    ens = PathEnsemble(TimeGrid.build([1.0]), np.zeros((50, 2)), master_seed=0)
    with pytest.raises(DegenerateEnsembleError):
        fdd_compare(ens, 2, 0)
    big = PathEnsemble(TimeGrid.build([1.0]), np.zeros((200, 2)), master_seed=0)
    with pytest.raises(ArgumentError):
        fdd_compare(big, 0, 0)


def test_tightness_with_large_eps_sees_nothing():
    d = 64
    params = WalkParams(d=d)
    theta = make_direction("flat_signed", d)
    rep = tightness_probe(params, theta, [0.0, 0.2, 0.4], 2 * theta.l1_norm + 1, 500, master_seed=2)
    assert rep.full.hits == 0 and rep.half.hits == 0
    assert rep.monotone
    assert rep.half.times == (0.0, 0.1, 0.2)


def test_tightness_windows():
    params = WalkParams(d=100)
    theta = make_direction("flat_signed", 100)
    rep = tightness_probe(params, theta, [0.0, 0.2, 0.4], 0.3, 4000, master_seed=4)
    for w in (rep.full, rep.half):
        assert 0 <= w.hits <= w.n_paths
        assert w.ci_low <= w.probability <= w.ci_high
    assert rep.full.scale == pytest.approx(0.4 ** 1.5 / 0.3 ** 3)
    assert rep.monotone


def test_tightness_guards():
    params = WalkParams(d=10)
    theta = make_direction("flat_signed", 10)
    with pytest.raises(ArgumentError):
        tightness_probe(params, theta, [0.2, 0.2, 0.4], 0.5, 100, 0)
    with pytest.raises(ArgumentError):
        tightness_probe(params, theta, [0.0, 0.2, 0.4], 0.0, 100, 0)


def test_conditional_increments_match_closed_form(rerun_once):
    params = WalkParams(d=100)
    theta = make_direction("flat_signed", 100, u=1.0)
    report = conditional_increment_check(params, theta, 0.5, 0.6, 20_000, master_seed=8)
    assert report.pulses == 10
    assert report.bound_holds
    assert report.bins
    assert sum(b.count for b in report.bins) <= 20_000
    assert rerun_once(lambda seed: conditional_increment_check(params, theta, 0.5, 0.6, 20_000, seed).passed(4.0), 8)


def test_increment_tails_sit_under_chebyshev_bound():
    params = WalkParams(d=100)
    theta = make_direction("flat_signed", 100, u=1.0)
    report = conditional_increment_check(params, theta, 0.5, 0.6, 20_000, master_seed=8, eps=0.3)
    for b in report.bins:
        assert b.tail_ci_low <= b.tail <= b.tail_ci_high
        # 4 m delta (1 + y^2) / eps^2 with m delta = 0.1 is at least 4.4
        assert b.tail_bound == 1.0
        assert b.tail_holds
    tight = conditional_increment_check(params, theta, 0.5, 0.52, 20_000, master_seed=8, eps=1.5)
    assert tight.pulses == 2
    assert all(b.tail == 0.0 and b.tail_bound < 1.0 and b.tail_holds for b in tight.bins)
    with pytest.raises(ArgumentError):
        conditional_increment_check(params, theta, 0.5, 0.6, 100, 0, eps=0.0)


def test_conditional_increment_guard():
    params = WalkParams(d=10)
    with pytest.raises(ArgumentError):
        conditional_increment_check(params, make_direction("flat_signed", 10), 0.6, 0.5, 100, 0)
