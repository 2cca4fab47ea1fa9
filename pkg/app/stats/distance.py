from __future__ import annotations
import math
from typing import Tuple

import numpy as np
from scipy.stats import binomtest, kstest

from ..errors import ArgumentError
from .moments import check_paths


def ks_distance(samples, mean: float, var: float) -> float:
    """sup |F_N - Phi((x - mean)/sqrt(var))| for the empirical CDF F_N."""
    x = np.asarray(samples, dtype=float).ravel()
    check_paths(x.size, "KS sample")
    if not var > 0:
        raise ArgumentError(f"KS target variance must be positive, got {var}")
    return float(kstest(x, "norm", args=(mean, math.sqrt(var))).statistic)


def wilson_interval(successes: int, total: int, confidence: float = 0.95) -> Tuple[float, float]:
    if total < 1:
        raise ArgumentError("Wilson interval needs at least one trial")
    ci = binomtest(int(successes), int(total)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)
