from __future__ import annotations
import math
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import ArgumentError

# slack so exact multiples of delta are not lost to binary rounding in t/delta
PULSE_EPS = 1e-9
# exact moments and fdd tests cover at most this many positive grid times
MAX_GRID_SEGMENTS = 4


# ----------------- process parameters -----------------
class WalkParams(BaseModel):
    """Lazy nearest-neighbour walk on {-1,+1}^d: per pulse stay w.p. 1-p, else flip one uniform coordinate."""
    model_config = ConfigDict(frozen=True)

    d: int = Field(ge=1)
    p: float = 0.5

    @field_validator("p")
    @classmethod
    def check_p(cls, v: float) -> float:
        if not 0.0 < v <= 1.0:
            raise ValueError(f"move probability p must lie in (0, 1], got {v}")
        return v

    @property
    def delta(self) -> float:
        """Pulse interval 2p/d."""
        return 2.0 * self.p / self.d

    @property
    def lam(self) -> float:
        """Non-unit eigenvalue 1-2p of the single-coordinate chain."""
        return 1.0 - 2.0 * self.p


class OUParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    start: float = 0.0

    @field_validator("start")
    @classmethod
    def check_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("OU start must be finite")
        return v


class ProjectedDiffusionParams(BaseModel):
    """One-dimensional projection of spherical Brownian motion on the sphere of radius sqrt(d)."""
    model_config = ConfigDict(frozen=True)

    d: int = Field(ge=1)

    @property
    def radius(self) -> float:
        return math.sqrt(self.d)

    def drift(self, y):
        return -(self.d - 1) * np.asarray(y) / self.d

    def diffusion(self, y):
        return 2.0 * (1.0 - np.asarray(y) ** 2 / self.d)


# ----------------- time grid -----------------
@dataclass(frozen=True)
class TimeGrid:
    """Times 0 = t_0 < ... < t_K with pulse counts n_k = floor(t_k / delta) when delta is set."""
    times: Tuple[float, ...]
    delta: Optional[float] = None
    pulse_counts: Tuple[int, ...] = field(init=False, default=())

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if not times or times[0] != 0.0:
            raise ArgumentError(f"time grid must start at t_0 = 0, got {times[:1]}")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ArgumentError(f"grid times must be strictly increasing, got {times}")
        object.__setattr__(self, "times", times)
        if self.delta is not None:
            if self.delta <= 0:
                raise ArgumentError(f"pulse interval must be positive, got {self.delta}")
            counts = tuple(int(math.floor(t / self.delta + PULSE_EPS)) for t in times)
            object.__setattr__(self, "pulse_counts", counts)

    @classmethod
    def build(cls, observation_times: Sequence[float], delta: Optional[float] = None) -> "TimeGrid":
        """Grid over 0 and the observation times (an observation at 0 is t_0 itself)."""
        obs = [float(t) for t in observation_times]
        if any(t < 0 for t in obs):
            raise ArgumentError(f"observation times must be non-negative, got {obs}")
        positive = [t for t in obs if t > 0]
        return cls(tuple([0.0] + positive), delta)

    @classmethod
    def from_pulse_counts(cls, counts: Sequence[int], delta: float) -> "TimeGrid":
        """Grid whose k-th time falls inside pulse interval counts[k-1] (counts non-decreasing)."""
        counts = [int(n) for n in counts]
        if any(n < 0 for n in counts) or any(b < a for a, b in zip(counts, counts[1:])):
            raise ArgumentError(f"pulse counts must be non-negative and non-decreasing, got {counts}")
        K = len(counts)
        times = [0.0] + [(n + k / (K + 2)) * delta for k, n in enumerate(counts, start=1)]
        return cls(tuple(times), delta)

    @property
    def K(self) -> int:
        return len(self.times) - 1

    @property
    def segment_pulses(self) -> Tuple[int, ...]:
        n = self.pulse_counts
        return tuple(b - a for a, b in zip(n, n[1:]))

    def with_delta(self, delta: float) -> "TimeGrid":
        return TimeGrid(self.times, delta)

    def aligned_to(self, delta: float) -> "TimeGrid":
        """This grid if it already counts pulses of length delta, else a re-counted copy."""
        if self.delta is None or abs(self.delta - delta) > 1e-15:
            return self.with_delta(delta)
        return self

    def columns(self, observation_times: Sequence[float]) -> List[int]:
        cols = []
        for t in observation_times:
            hits = [k for k, s in enumerate(self.times) if abs(s - float(t)) <= 1e-12]
            if not hits:
                raise ArgumentError(f"time {t} is not on the grid {self.times}")
            cols.append(hits[0])
        return cols


# ----------------- walker state, directions, ensembles -----------------
@dataclass
class CubeState:
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords)
        if c.ndim != 1 or not np.all(np.abs(c) == 1):
            raise ArgumentError("cube state coordinates must all be ±1")
        self.coords = c.astype(np.int8)

    @classmethod
    def ones(cls, d: int) -> "CubeState":
        return cls(np.ones(d, dtype=np.int8))

    @property
    def d(self) -> int:
        return self.coords.shape[0]


@dataclass
class DirectionVector:
    coords: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ArgumentError("direction must be a non-empty vector")
        if abs(float(c @ c) - 1.0) > 1e-12:
            raise ArgumentError(f"direction must be a unit vector, |theta|^2 = {float(c @ c)}")
        self.coords = c

    @property
    def d(self) -> int:
        return self.coords.shape[0]

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.coords)))

    @property
    def start_projection(self) -> float:
        """y = <theta, (1,...,1)>, the projection of the walk's start."""
        return float(self.coords.sum())

    @property
    def l1_norm(self) -> float:
        return float(np.abs(self.coords).sum())


@dataclass
class PathEnsemble:
    grid: TimeGrid
    values: np.ndarray
    master_seed: int
    process: str = "lnnrw"
    start: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.K + 1:
            raise ArgumentError(
                f"ensemble values must be N×{self.grid.K + 1}, got {self.values.shape}"
            )

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def weighted(self, weights: Sequence[float]) -> np.ndarray:
        """Psi = sum_k phi_k Y_{t_k}; K weights use columns 1..K, K+1 weights use every column."""
        w = np.asarray(weights, dtype=float)
        K = self.grid.K
        if w.size == K and K > 0:
            return self.values[:, 1:] @ w
        if w.size == K + 1:
            return self.values @ w
        raise ArgumentError(f"{w.size} weights for a grid with K={K}")


# ----------------- experiment config -----------------
ProcessKind = Literal["lnnrw", "z", "ou", "sbm1d", "sbmfull"]
DirectionKind = Literal["flat_signed", "uniform_sphere", "basis", "custom"]


class ConfigSection(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _split_list(v):
    if isinstance(v, str):
        return [s.strip() for s in v.split(",") if s.strip()]
    return v


class WalkSection(ConfigSection):
    d: int = Field(50, ge=1)
    p: float = 0.5

    @field_validator("p")
    @classmethod
    def check_p(cls, v: float) -> float:
        if not 0.0 < v <= 1.0:
            raise ValueError(f"walk.p must lie in (0, 1], got {v}")
        return v


class DirectionSection(ConfigSection):
    kind: DirectionKind = "flat_signed"
    u: float = 0.0
    index: int = Field(1, ge=1)
    values: Optional[List[float]] = None
    seed: int = Field(0, ge=0)

    @field_validator("values", mode="before")
    @classmethod
    def split_lists(cls, v):
        return _split_list(v)


class GridSection(ConfigSection):
    times: List[float] = Field(default_factory=lambda: [0.5, 1.0])
    weights: Optional[List[float]] = None

    @field_validator("times", "weights", mode="before")
    @classmethod
    def split_lists(cls, v):
        return _split_list(v)

    @field_validator("times")
    @classmethod
    def check_increasing(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("grid.times must not be empty")
        if any(t < 0 for t in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"grid.times must be non-negative and strictly increasing, got {v}")
        if sum(1 for t in v if t > 0) > MAX_GRID_SEGMENTS:
            raise ValueError(f"grid.times allows at most {MAX_GRID_SEGMENTS} positive times, got {v}")
        return v


class RunSection(ConfigSection):
    paths: int = Field(10_000, ge=1)
    lmax: int = Field(4, ge=1, le=8)
    seed: int = Field(20240101, ge=0, lt=2**64)
    threads: int = Field(1, ge=1)


class SdeSection(ConfigSection):
    h: float = 1e-3
    y0: Optional[float] = None

    @field_validator("h")
    @classmethod
    def check_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError(f"sde.h must be positive, got {v}")
        return v


class SweepSection(ConfigSection):
    d: List[int] = Field(default_factory=lambda: [10, 100, 1000])

    @field_validator("d", mode="before")
    @classmethod
    def split_lists(cls, v):
        return _split_list(v)

    @field_validator("d")
    @classmethod
    def check_increasing(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("sweep.d must list at least one dimension")
        if any(x < 1 for x in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"sweep.d must be positive and strictly increasing, got {v}")
        return v


class FddSection(ConfigSection):
    draws: int = Field(8, ge=1)


class TightnessSection(ConfigSection):
    times: List[float] = Field(default_factory=lambda: [0.0, 0.2, 0.4])
    eps: float = 0.5
    bins: int = Field(8, ge=1)

    @field_validator("times", mode="before")
    @classmethod
    def split_lists(cls, v):
        return _split_list(v)

    @field_validator("times")
    @classmethod
    def check_triple(cls, v: List[float]) -> List[float]:
        if len(v) != 3 or v[0] < 0 or not v[0] < v[1] < v[2]:
            raise ValueError(f"tightness.times must be t1 < t2 < t3 (non-negative), got {v}")
        return v

    @field_validator("eps")
    @classmethod
    def check_eps(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("tightness.eps must be positive")
        return v


class Thresholds(ConfigSection):
    ks_pass: float = 0.05
    ks_fail: float = 0.3
    mean_gap: float = 1e-3
    z_max: float = 4.0


class OutputSection(ConfigSection):
    path: Optional[str] = None
    format: Literal["csv", "json"] = "csv"
    raw: bool = False


class ExperimentConfig(ConfigSection):
    process: ProcessKind = "lnnrw"
    walk: WalkSection = WalkSection()
    direction: DirectionSection = DirectionSection()
    grid: GridSection = GridSection()
    run: RunSection = RunSection()
    sde: SdeSection = SdeSection()
    sweep: SweepSection = SweepSection()
    fdd: FddSection = FddSection()
    tightness: TightnessSection = TightnessSection()
    thresholds: Thresholds = Thresholds()
    output: OutputSection = OutputSection()
    expect_fail: bool = False

    @model_validator(mode="after")
    def check_cross_fields(self) -> "ExperimentConfig":
        d = self.walk.d
        kind = self.direction.kind
        if kind == "flat_signed" and abs(self.direction.u) > math.sqrt(d):
            raise ValueError(f"flat_signed(u={self.direction.u}) is infeasible for d={d}: need |u| <= sqrt(d)")
        if kind == "basis" and self.direction.index > d:
            raise ValueError(f"direction.index={self.direction.index} exceeds d={d}")
        if kind == "custom":
            vals = self.direction.values
            if vals is None or len(vals) != d:
                raise ValueError(f"custom direction needs direction.values of length d={d}")
            if not any(vals):
                raise ValueError("custom direction must be non-zero")
        if self.grid.weights is not None and len(self.grid.weights) != len(self.grid.times):
            raise ValueError(
                f"grid.weights has {len(self.grid.weights)} entries for {len(self.grid.times)} grid times"
            )
        if self.sde.y0 is not None and abs(self.sde.y0) > math.sqrt(d):
            raise ValueError(f"sde.y0={self.sde.y0} lies outside [-sqrt(d), sqrt(d)]")
        return self

    def walk_params(self, d: Optional[int] = None) -> WalkParams:
        return WalkParams(d=d or self.walk.d, p=self.walk.p)
