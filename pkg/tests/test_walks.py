import math

import numpy as np
import pytest

from app.checks.moments import mc_consistency
from app.errors import ArgumentError
from app.models import CubeState, TimeGrid, WalkParams
from app.sim.chain import counts_representation_law, pushforward, total_variation
from app.sim.seeding import BLOCK_SIZE, THREADS_ENV, default_threads, derive_seed, path_blocks, stream
from app.sim.walks import (
    lnnrw_pulse, make_direction, simulate_counts_representation, simulate_projection_paths, simulate_z_paths,
)


def test_flat_signed_direction():
    theta = make_direction("flat_signed", 4, u=0.0)
    np.testing.assert_allclose(theta.coords, [0.5, 0.5, -0.5, -0.5])
    assert theta.start_projection == 0.0
    assert theta.sup_norm == 0.5
    theta = make_direction("flat_signed", 100, u=1.0)
    assert theta.start_projection == pytest.approx(1.0)
    with pytest.raises(ArgumentError):
        make_direction("flat_signed", 4, u=2.5)


def test_flat_signed_extremes():
    theta = make_direction("flat_signed", 9, u=3.0)
    assert np.all(theta.coords > 0)
    assert theta.start_projection == pytest.approx(3.0)


def test_basis_and_custom_directions():
    e3 = make_direction("basis", 5, index=3)
    assert e3.coords.tolist() == [0, 0, 1, 0, 0]
    assert e3.sup_norm == 1.0
    with pytest.raises(ArgumentError):
        make_direction("basis", 5, index=6)
    c = make_direction("custom", 2, values=[3.0, 4.0])
    np.testing.assert_allclose(c.coords, [0.6, 0.8])
    with pytest.raises(ArgumentError):
        make_direction("custom", 2, values=[0.0, 0.0])
    with pytest.raises(ArgumentError):
        make_direction("custom", 3, values=[1.0, 2.0])
    with pytest.raises(ArgumentError):
        make_direction("diagonal", 3)


def test_uniform_sphere_is_seeded():
    a = make_direction("uniform_sphere", 20, seed=7)
    b = make_direction("uniform_sphere", 20, seed=7)
    c = make_direction("uniform_sphere", 20, seed=8)
    np.testing.assert_array_equal(a.coords, b.coords)
    assert not np.array_equal(a.coords, c.coords)
    assert float(a.coords @ a.coords) == pytest.approx(1.0)


def test_pulse_with_p_one_flips_exactly_one_coordinate():
    params = WalkParams(d=6, p=1.0)
    rng = stream(1)
    state = CubeState.ones(6)
    for _ in range(20):
        nxt = lnnrw_pulse(state, params, rng)
        assert np.sum(nxt.coords != state.coords) == 1
        state = nxt


def test_pulse_dimension_mismatch():
    with pytest.raises(ArgumentError):
        lnnrw_pulse(CubeState.ones(3), WalkParams(d=4), stream(0))


def test_cube_state_rejects_non_signs():
    with pytest.raises(ArgumentError):
        CubeState(np.array([1, 0, -1]))


def test_counts_representation_state():
    params = WalkParams(d=8, p=0.5)
    s = simulate_counts_representation(params, 0, stream(2))
    assert np.all(s.coords == 1)
    s = simulate_counts_representation(params, 40, stream(2))
    assert s.d == 8 and set(np.unique(s.coords)) <= {-1, 1}
    with pytest.raises(ArgumentError):
        simulate_counts_representation(params, -1, stream(2))


def test_paths_start_at_projection_and_stay_on_lattice():
    params = WalkParams(d=16)
    theta = make_direction("basis", 16, index=2)
    grid = TimeGrid.build([0.5, 1.0], params.delta)
    ens = simulate_projection_paths(params, theta, grid, 500, master_seed=3)
    assert ens.values.shape == (500, 3)
    assert np.all(ens.values[:, 0] == 1.0)
    assert set(np.unique(ens.values)) <= {-1.0, 1.0}


def test_flat_paths_bounded_by_sqrt_d():
    params = WalkParams(d=25)
    theta = make_direction("flat_signed", 25, u=1.0)
    ens = simulate_projection_paths(params, theta, TimeGrid.build([2.0], params.delta), 300, master_seed=4)
    assert np.all(np.abs(ens.values) <= math.sqrt(25) + 1e-12)
    assert ens.values[0, 0] == pytest.approx(theta.start_projection)


@pytest.mark.parametrize("sampler", [simulate_projection_paths, simulate_z_paths])
def test_results_do_not_depend_on_threads(sampler):
    params = WalkParams(d=30)
    theta = make_direction("uniform_sphere", 30, seed=2)
    grid = TimeGrid.build([0.3, 0.8], params.delta)
    one = sampler(params, theta, grid, 3000, master_seed=99, threads=1)
    four = sampler(params, theta, grid, 3000, master_seed=99, threads=4)
    np.testing.assert_array_equal(one.values, four.values)
    other = sampler(params, theta, grid, 3000, master_seed=100, threads=1)
    assert not np.array_equal(one.values, other.values)


def test_prefix_paths_are_stable():
    params = WalkParams(d=10)
    theta = make_direction("flat_signed", 10)
    grid = TimeGrid.build([1.0], params.delta)
    small = simulate_projection_paths(params, theta, grid, BLOCK_SIZE, master_seed=5)
    big = simulate_projection_paths(params, theta, grid, 2 * BLOCK_SIZE + 7, master_seed=5)
    np.testing.assert_array_equal(small.values, big.values[:BLOCK_SIZE])


def test_direction_dimension_mismatch():
    params = WalkParams(d=5)
    with pytest.raises(ArgumentError):
        simulate_projection_paths(params, make_direction("flat_signed", 4), TimeGrid.build([1.0]), 10, 0)


def test_path_blocks():
    assert path_blocks(1) == [(0, 1)]
    assert path_blocks(BLOCK_SIZE + 1) == [(0, BLOCK_SIZE), (1, 1)]
    with pytest.raises(ArgumentError):
        path_blocks(0)


def test_derive_seed_is_deterministic():
    assert derive_seed(1, 7, 0) == derive_seed(1, 7, 0)
    assert derive_seed(1, 7, 0) != derive_seed(1, 7, 1)
    assert 0 <= derive_seed(2**64 - 1, 3) < 2**64


def test_default_threads(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert default_threads() == 1
    monkeypatch.setenv(THREADS_ENV, "6")
    assert default_threads() == 6
    monkeypatch.setenv(THREADS_ENV, "many")
    assert default_threads() == 1


def test_z_paths_match_exact_z_moments(rerun_once):
    params = WalkParams(d=40)
    theta = make_direction("flat_signed", 40, u=1.0)

    def check(seed):
        reports, _ = mc_consistency(params, theta, [1.0], None, 20_000, seed, lmax=2, which="Z")
        return all(r.passed(4.0) for r in reports)

    assert rerun_once(check, 11)


@pytest.mark.slow
def test_monte_carlo_moments_match_exact_engine():
    params = WalkParams(d=50)
    theta = make_direction("flat_signed", 50, u=1.0)
    reports, case = mc_consistency(params, theta, [0.5, 1.0], [1.0, 1.0], 100_000, 20240101, lmax=4, threads=2)
    assert [r.order for r in reports] == [1, 2, 3, 4]
    assert all(r.passed(4.0) for r in reports), [(r.order, r.z) for r in reports]
    assert "d=50" in case


def _state_index(coords) -> int:
    # cube_states order: coordinate j sits at bit d-1-j, a set bit means -1
    d = len(coords)
    return sum(1 << (d - 1 - j) for j, c in enumerate(coords) if c == -1)


def test_lazy_pulse_law_on_the_square():
    params = WalkParams(d=2, p=0.5)
    rng = stream(31)
    n = 40_000
    counts = np.zeros(4)
    first = 0.0
    for _ in range(n):
        nxt = lnnrw_pulse(CubeState.ones(2), params, rng)
        counts[_state_index(nxt.coords)] += 1
        first += nxt.coords[0]
    exact = pushforward(params, 1)
    np.testing.assert_allclose(exact, [0.5, 0.25, 0.25, 0.0], atol=1e-15)
    assert counts[3] == 0
    freq = counts / n
    for k in range(3):
        assert abs(freq[k] - exact[k]) <= 4 * math.sqrt(exact[k] * (1 - exact[k]) / n)
    # E X_j after one pulse is 1 - delta; X_1 = -1 with probability 1/4
    assert abs(first / n - (1 - params.delta)) <= 4 * math.sqrt(0.75 / n)


@pytest.mark.parametrize("d,p,n", [(3, 0.5, 4), (3, 0.8, 7), (4, 1.0, 5)])
def test_counts_representation_matches_exact_law(d, p, n):
    params = WalkParams(d=d, p=p)
    rng = stream(17, d, n)
    draws = 20_000
    counts = np.zeros(2 ** d)
    for _ in range(draws):
        counts[_state_index(simulate_counts_representation(params, n, rng).coords)] += 1
    law = counts_representation_law(params, n)
    assert total_variation(law, pushforward(params, n)) < 1e-12
    assert total_variation(counts / draws, law) < 0.02
