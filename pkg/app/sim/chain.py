"""
Exact small-d oracles built from the 2^d-state transition matrix of the walk.
States are ordered as itertools.product((1, -1), repeat=d); state 0 is (1,...,1).
"""
from __future__ import annotations
from itertools import product
from math import factorial, prod
from typing import Iterator, Sequence, Tuple

import numpy as np
from scipy.stats import binom

from ..errors import ArgumentError, SizeLimitError
from ..models import DirectionVector, TimeGrid, WalkParams

MAX_CHAIN_DIM = 10


def _check_dim(d: int):
    if not 1 <= d <= MAX_CHAIN_DIM:
        raise SizeLimitError(f"exact chain needs 1 <= d <= {MAX_CHAIN_DIM}, got d={d}")


def cube_states(d: int) -> np.ndarray:
    _check_dim(d)
    return np.array(list(product((1, -1), repeat=d)), dtype=np.int8)


def transition_matrix(params: WalkParams) -> np.ndarray:
    d = params.d
    _check_dim(d)
    S = 2 ** d
    P = np.zeros((S, S))
    for s in range(S):
        P[s, s] += 1.0 - params.p
        for j in range(d):
            # coordinate j sits at bit d-1-j; a set bit means -1
            P[s, s ^ (1 << (d - 1 - j))] += params.p / d
    return P


def pushforward(params: WalkParams, n: int) -> np.ndarray:
    """Law of X(n) from (1,...,1)."""
    if n < 0:
        raise ArgumentError(f"pulse count must be non-negative, got {n}")
    P = transition_matrix(params)
    start = np.zeros(P.shape[0])
    start[0] = 1.0
    return start @ np.linalg.matrix_power(P, n)


def _segment_powers(params: WalkParams, grid: TimeGrid) -> list[np.ndarray]:
    grid = grid.aligned_to(params.delta)
    P = transition_matrix(params)
    return [np.linalg.matrix_power(P, m) for m in grid.segment_pulses]


def chain_moment(params: WalkParams, grid: TimeGrid, split) -> float:
    """E prod_k prod_{l in segment k} X_{k, i_l} by forward propagation."""
    if len(split.segment_lengths) != grid.K:
        raise ArgumentError(f"split has {len(split.segment_lengths)} segments, grid has K={grid.K}")
    states = cube_states(params.d)
    v = np.zeros(states.shape[0])
    v[0] = 1.0
    pos = 0
    for Pm, length in zip(_segment_powers(params, grid), split.segment_lengths):
        v = v @ Pm
        g = np.ones(states.shape[0])
        for i in split.index.entries[pos:pos + length]:
            g *= states[:, i - 1]
        v = v * g
        pos += length
    return float(v.sum())


def chain_psi_moment(params: WalkParams, grid: TimeGrid, theta: DirectionVector,
                     phi: Sequence[float], L: int) -> float:
    """E (sum_k phi_k <theta, X_k>)^L over the joint law of the chain at the grid times."""
    if len(phi) != grid.K or grid.K == 0:
        raise ArgumentError(f"{len(phi)} weights for a grid with K={grid.K}")
    states = cube_states(params.d)
    y = states @ theta.coords
    v0 = np.zeros(states.shape[0])
    v0[0] = 1.0
    joint = None
    psi = None
    for k, Pm in enumerate(_segment_powers(params, grid)):
        if joint is None:
            joint = v0 @ Pm
            psi = phi[k] * y
        else:
            joint = joint[..., None] * Pm
            psi = psi[..., None] + phi[k] * y
    return float(np.sum(joint * psi ** L))


def _compositions(n: int, parts: int) -> Iterator[Tuple[int, ...]]:
    if parts == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest


def counts_representation_law(params: WalkParams, n: int) -> np.ndarray:
    """Exact law of the multinomial representation, enumerated over all pulse splits."""
    if n < 0:
        raise ArgumentError(f"pulse count must be non-negative, got {n}")
    d = params.d
    states = cube_states(d)
    law = np.zeros(states.shape[0])
    neg = states == -1
    for m in _compositions(n, d):
        weight = factorial(n) / prod(factorial(x) for x in m) / d ** n
        q = (1.0 - params.lam ** np.asarray(m, dtype=float)) / 2.0
        law += weight * np.prod(np.where(neg, q, 1.0 - q), axis=1)
    return law


def x_coordinate_law(params: WalkParams, n: int, j: int = 1) -> float:
    """P(X_j(n) = -1) from the chain pushforward."""
    states = cube_states(params.d)
    return float(pushforward(params, n)[states[:, j - 1] == -1].sum())


def z_coordinate_law(params: WalkParams, n: int) -> float:
    """P(Z_j(n) = -1): Bi(n, 1/d) activations of the two-state chain."""
    b = np.arange(n + 1)
    return float(np.sum(binom.pmf(b, n, 1.0 / params.d) * (1.0 - params.lam ** b.astype(float)) / 2.0))


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
