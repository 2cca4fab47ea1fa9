"""
Samplers for the hypercube walk X, its multinomial-count representation, and
the independent-coordinate comparison process Z, all started from (1,...,1).
"""
from __future__ import annotations
import math
from typing import Optional, Sequence

import numpy as np

from ..errors import ArgumentError
from ..models import CubeState, DirectionVector, PathEnsemble, TimeGrid, WalkParams
from .seeding import run_blocks, stream


def make_direction(kind: str, d: int, u: float = 0.0, index: int = 1,
                   values: Optional[Sequence[float]] = None, seed: int = 0) -> DirectionVector:
    """
    flat_signed(u): entries ±1/sqrt(d), the first m+ = round((d + u sqrt(d))/2) positive.
    uniform_sphere: normalised standard-normal vector (seeded).
    basis(index): e_index, 1-based; violates the vanishing sup-norm hypothesis.
    custom(values): normalised input.
    """
    if d < 1:
        raise ArgumentError(f"dimension must be positive, got {d}")
    if kind == "flat_signed":
        root = math.sqrt(d)
        if abs(u) > root:
            raise ArgumentError(f"flat_signed(u={u}) infeasible for d={d}: need |u| <= {root:.6g}")
        # half-up rounding
        m_plus = int(math.floor((d + u * root) / 2 + 0.5))
        m_plus = min(max(m_plus, 0), d)
        coords = np.full(d, -1.0 / root)
        coords[:m_plus] = 1.0 / root
    elif kind == "uniform_sphere":
        g = stream(seed).standard_normal(d)
        coords = g / np.linalg.norm(g)
    elif kind == "basis":
        if not 1 <= index <= d:
            raise ArgumentError(f"basis index {index} outside 1..{d}")
        coords = np.zeros(d)
        coords[index - 1] = 1.0
    elif kind == "custom":
        if values is None:
            raise ArgumentError("custom direction needs values")
        v = np.asarray(values, dtype=float)
        if v.shape != (d,):
            raise ArgumentError(f"custom direction has shape {v.shape}, expected ({d},)")
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ArgumentError("custom direction must be non-zero")
        coords = v / norm
    else:
        raise ArgumentError(f"unknown direction kind {kind!r}")
    return DirectionVector(coords, kind=kind)


def _pulse_block(states: np.ndarray, p: float, rng: np.random.Generator):
    """One clock pulse for every row of `states`, in place."""
    size, d = states.shape
    moving = rng.random(size) < p
    coord = rng.integers(0, d, size=size)
    rows = np.flatnonzero(moving)
    states[rows, coord[rows]] *= -1


def lnnrw_pulse(state: CubeState, params: WalkParams, rng: np.random.Generator) -> CubeState:
    if state.d != params.d:
        raise ArgumentError(f"state has d={state.d}, params have d={params.d}")
    arr = state.coords[None, :].copy()
    _pulse_block(arr, params.p, rng)
    return CubeState(arr[0])


def _check_direction(params: WalkParams, theta: DirectionVector):
    if theta.d != params.d:
        raise ArgumentError(f"direction has d={theta.d}, walk has d={params.d}")


def simulate_projection_paths(params: WalkParams, theta: DirectionVector, grid: TimeGrid,
                              n_paths: int, master_seed: int, threads: int = 1) -> PathEnsemble:
    """Y = <theta, X> recorded after n_k pulses for every grid time."""
    _check_direction(params, theta)
    grid = grid.aligned_to(params.delta)
    counts = grid.pulse_counts
    th = theta.coords

    def kernel(rng: np.random.Generator, size: int) -> np.ndarray:
        states = np.ones((size, params.d), dtype=np.int8)
        out = np.empty((size, len(counts)))
        done = 0
        for k, n_k in enumerate(counts):
            for _ in range(n_k - done):
                _pulse_block(states, params.p, rng)
            done = n_k
            out[:, k] = states @ th
        return out

    values = run_blocks(n_paths, master_seed, kernel, threads)
    return PathEnsemble(grid, values, master_seed, process="lnnrw", start=theta.start_projection)


def simulate_counts_representation(params: WalkParams, n: int, rng: np.random.Generator) -> CubeState:
    """
    X(n) through the multinomial representation: M ~ Mult(n; 1/d,...,1/d) pulses
    land on each coordinate, and coordinate j then runs M_j steps of the
    two-state chain with flip probability p per step.
    """
    if n < 0:
        raise ArgumentError(f"pulse count must be non-negative, got {n}")
    d = params.d
    counts = rng.multinomial(n, np.full(d, 1.0 / d))
    flip = rng.random(d) < (1.0 - params.lam ** counts) / 2.0
    return CubeState(np.where(flip, -1, 1))


def simulate_z_paths(params: WalkParams, theta: DirectionVector, grid: TimeGrid,
                     n_paths: int, master_seed: int, threads: int = 1) -> PathEnsemble:
    """<theta, Z> where each coordinate is activated independently with probability 1/d per pulse."""
    _check_direction(params, theta)
    grid = grid.aligned_to(params.delta)
    segments = (grid.pulse_counts[0],) + grid.segment_pulses
    th = theta.coords
    d, lam = params.d, params.lam

    def kernel(rng: np.random.Generator, size: int) -> np.ndarray:
        states = np.ones((size, d), dtype=np.int8)
        out = np.empty((size, len(segments)))
        for k, m in enumerate(segments):
            if m > 0:
                active = rng.binomial(m, 1.0 / d, size=(size, d))
                flip = rng.random((size, d)) < (1.0 - np.power(lam, active)) / 2.0
                states[flip] *= -1
            out[:, k] = states @ th
        return out

    values = run_blocks(n_paths, master_seed, kernel, threads)
    return PathEnsemble(grid, values, master_seed, process="z", start=theta.start_projection)
