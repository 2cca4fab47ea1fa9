from __future__ import annotations
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DegenerateEnsembleError
from ..models import PathEnsemble

BATCHES = 32
MIN_PATHS = 100


@dataclass
class MomentReport:
    order: int
    empirical: float
    std_error: float
    exact: float

    @property
    def z(self) -> float:
        gap = self.empirical - self.exact
        if self.std_error > 0:
            return gap / self.std_error
        # constant samples: exact agreement or an infinite z
        return 0.0 if abs(gap) <= 1e-12 * max(1.0, abs(self.exact)) else math.copysign(math.inf, gap)

    def passed(self, z_max: float = 4.0) -> bool:
        return abs(self.z) <= z_max


def check_paths(n: int, what: str = "ensemble"):
    if n < MIN_PATHS:
        raise DegenerateEnsembleError(f"{what} has {n} samples, need at least {MIN_PATHS}")


def batch_standard_error(samples, batches: int = BATCHES) -> float:
    """Standard error of the sample mean from `batches` contiguous batch means."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        return 0.0
    b = min(batches, x.size)
    means = np.array([chunk.mean() for chunk in np.array_split(x, b)])
    return float(means.std(ddof=1) / math.sqrt(b))


def sample_moment(samples, L: int, exact: float) -> MomentReport:
    x = np.asarray(samples, dtype=float)
    check_paths(x.size, "sample")
    powered = x ** L
    return MomentReport(L, float(powered.mean()), batch_standard_error(powered), float(exact))


def empirical_moment(ensemble: PathEnsemble, weights: Sequence[float], L: int, exact: float) -> MomentReport:
    """Mean of Psi^L over the ensemble, Psi = sum_k phi_k Y_{t_k}, against an exact value."""
    check_paths(ensemble.n_paths)
    return sample_moment(ensemble.weighted(weights), L, exact)
