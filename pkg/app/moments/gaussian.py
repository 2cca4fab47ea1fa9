"""Gaussian targets: OU transitions and moments of Gamma = sum_k phi_k U_{t_k}."""
from __future__ import annotations
import math
from typing import Sequence, Tuple

import numpy as np

from ..errors import ArgumentError, SizeLimitError
from ..models import OUParams

MAX_GAUSSIAN_ORDER = 12


def _double_factorial_odd(j: int) -> int:
    """(2j-1)!! = (2j)! / (2^j j!), with (-1)!! = 1."""
    return math.factorial(2 * j) // (2 ** j * math.factorial(j))


def ou_transition(params: OUParams, t: float) -> Tuple[float, float]:
    """(mean, variance) of U_t given U_0 = start: (u e^{-t}, 1 - e^{-2t})."""
    if t < 0:
        raise ArgumentError(f"time must be non-negative, got {t}")
    return params.start * math.exp(-t), -math.expm1(-2.0 * t)


def gamma_params(u: float, times: Sequence[float], phi: Sequence[float]) -> Tuple[float, float]:
    t = np.asarray(times, dtype=float)
    w = np.asarray(phi, dtype=float)
    if t.shape != w.shape:
        raise ArgumentError(f"{w.size} weights for {t.size} times")
    if np.any(t < 0):
        raise ArgumentError(f"times must be non-negative, got {times}")
    mean = u * float(w @ np.exp(-t))
    cov = np.exp(-np.abs(t[:, None] - t[None, :])) - np.exp(-(t[:, None] + t[None, :]))
    var = float(w @ cov @ w)
    return mean, max(var, 0.0)


def gaussian_moment(mean: float, var: float, L: int) -> float:
    """E X^L for X ~ N(mean, var): sum_j C(L,2j) mean^{L-2j} var^j (2j-1)!!."""
    if L < 0:
        raise ArgumentError(f"moment order must be non-negative, got {L}")
    if L > MAX_GAUSSIAN_ORDER:
        raise SizeLimitError(f"Gaussian moments are exact up to L={MAX_GAUSSIAN_ORDER}, got L={L}")
    if var < 0:
        raise ArgumentError(f"variance must be non-negative, got {var}")
    return float(sum(
        math.comb(L, 2 * j) * mean ** (L - 2 * j) * var ** j * _double_factorial_odd(j)
        for j in range(L // 2 + 1)
    ))


def gamma_moment(params: OUParams, times: Sequence[float], phi: Sequence[float], L: int) -> float:
    mean, var = gamma_params(params.start, times, phi)
    return gaussian_moment(mean, var, L)


def gaussian_abs_moment(mean: float, var: float, L: int) -> float:
    """Upper bound on E|X|^L via |m + sZ|^L <= sum_j C(L,j)|m|^{L-j} s^j |Z|^j."""
    s = math.sqrt(max(var, 0.0))
    return float(sum(
        math.comb(L, j) * abs(mean) ** (L - j) * s ** j
        * 2.0 ** (j / 2.0) * math.gamma((j + 1) / 2.0) / math.sqrt(math.pi)
        for j in range(L + 1)
    ))
