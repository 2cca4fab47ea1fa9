"""
Continuous-time samplers: exact OU transitions, Euler-Maruyama for the
projected spherical Brownian motion, and a tangent-projection scheme for the
full spherical Brownian motion on the sphere of radius sqrt(d).
"""
from __future__ import annotations
import math
from typing import List

import numpy as np

from ..errors import ArgumentError
from ..models import DirectionVector, OUParams, PathEnsemble, ProjectedDiffusionParams, TimeGrid
from ..util.logger import warn
from .seeding import run_blocks


def _substeps(span: float, h: float) -> tuple[int, float]:
    """Split a time span into equal steps no longer than h."""
    n = max(1, int(math.ceil(span / h - 1e-9)))
    return n, span / n


def simulate_ou_paths(params: OUParams, grid: TimeGrid, n_paths: int, master_seed: int,
                      threads: int = 1) -> PathEnsemble:
    """Exact sampling: U_{t+s} | U_t ~ Normal(U_t e^{-s}, 1 - e^{-2s})."""
    gaps = np.diff(grid.times)
    decay = np.exp(-gaps)
    scale = np.sqrt(-np.expm1(-2.0 * gaps))

    def kernel(rng: np.random.Generator, size: int) -> np.ndarray:
        out = np.empty((size, grid.K + 1))
        out[:, 0] = params.start
        for k in range(grid.K):
            out[:, k + 1] = out[:, k] * decay[k] + scale[k] * rng.standard_normal(size)
        return out

    values = run_blocks(n_paths, master_seed, kernel, threads)
    return PathEnsemble(grid, values, master_seed, process="ou", start=params.start)


def simulate_projected_sbm(params: ProjectedDiffusionParams, y0: float, grid: TimeGrid, n_paths: int,
                           h: float, master_seed: int, threads: int = 1) -> PathEnsemble:
    """Euler-Maruyama for dY = b_d(Y) dt + sqrt(a_d(Y)) dW, clamped to [-sqrt(d), sqrt(d)]."""
    if h <= 0:
        raise ArgumentError(f"step h must be positive, got {h}")
    r = params.radius
    if abs(y0) > r + 1e-12:
        raise ArgumentError(f"y0={y0} lies outside [-{r:.6g}, {r:.6g}]")
    steps = [_substeps(span, h) for span in np.diff(grid.times)]
    clamped: List[int] = []

    def kernel(rng: np.random.Generator, size: int) -> np.ndarray:
        y = np.full(size, float(y0))
        out = np.empty((size, grid.K + 1))
        out[:, 0] = y
        hits = 0
        for k, (n, dt) in enumerate(steps):
            sq = math.sqrt(dt)
            for _ in range(n):
                a = np.maximum(params.diffusion(y), 0.0)
                y = y + params.drift(y) * dt + np.sqrt(a) * sq * rng.standard_normal(size)
                over = np.abs(y) > r
                if over.any():
                    hits += int(over.sum())
                    np.clip(y, -r, r, out=y)
            out[:, k + 1] = y
        clamped.append(hits)
        return out

    values = run_blocks(n_paths, master_seed, kernel, threads)
    if sum(clamped):
        warn(f"projected SBM: {sum(clamped)} Euler steps clamped at ±sqrt(d) (d={params.d}, h={h})")
    return PathEnsemble(grid, values, master_seed, process="sbm1d", start=float(y0))


def simulate_full_sbm(d: int, x0, theta: DirectionVector, grid: TimeGrid, n_paths: int,
                      h: float, master_seed: int, threads: int = 1) -> PathEnsemble:
    """
    Brownian motion on the sphere of radius sqrt(d), observed through <theta, X>.

    Per step: Gaussian increment scaled by sqrt(2h), projected onto the tangent
    space at X, added, then X rescaled back to radius sqrt(d). The rescaling
    supplies the -(d-1)/d x drift to first order in h.
    """
    if h <= 0:
        raise ArgumentError(f"step h must be positive, got {h}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (d,):
        raise ArgumentError(f"start has shape {x0.shape}, expected ({d},)")
    if theta.d != d:
        raise ArgumentError(f"direction has d={theta.d}, sphere has d={d}")
    radius = math.sqrt(d)
    if abs(np.linalg.norm(x0) - radius) > 1e-9:
        raise ArgumentError(f"start lies off the sphere: |x0| = {np.linalg.norm(x0)}, expected {radius}")
    steps = [_substeps(span, h) for span in np.diff(grid.times)]
    th = theta.coords

    def kernel(rng: np.random.Generator, size: int) -> np.ndarray:
        x = np.tile(x0, (size, 1))
        out = np.empty((size, grid.K + 1))
        out[:, 0] = x @ th
        for k, (n, dt) in enumerate(steps):
            sq = math.sqrt(2.0 * dt)
            for _ in range(n):
                g = rng.standard_normal((size, d)) * sq
                g -= (np.einsum("ij,ij->i", g, x) / d)[:, None] * x
                x += g
                x *= (radius / np.linalg.norm(x, axis=1))[:, None]
            out[:, k + 1] = x @ th
        return out

    values = run_blocks(n_paths, master_seed, kernel, threads)
    return PathEnsemble(grid, values, master_seed, process="sbmfull", start=float(x0 @ th))
