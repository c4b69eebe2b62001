"""Quantized heart-rate grid and distributions over it.

Heart rate is treated as a discrete state living on a uniform grid of
half-open bins [lower, upper) spanning [y_min, y_max).  Distributions over
the bins are the currency every other module trades in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ParameterError, RangeError

DEFAULT_BIN_COUNT = 64
DEFAULT_Y_MIN = 30.0
DEFAULT_Y_MAX = 210.0
DEFAULT_SIGMA_Y = 1.5

_PROB_SUM_TOL = 1e-9


def _frozen_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class HrGrid:
    """Uniform partition of [y_min, y_max) BPM into half-open bins."""

    bin_count: int = DEFAULT_BIN_COUNT
    y_min: float = DEFAULT_Y_MIN
    y_max: float = DEFAULT_Y_MAX

    def __post_init__(self):
        if not isinstance(self.bin_count, (int, np.integer)) or self.bin_count < 2:
            raise ParameterError(f"bin_count must be an integer >= 2, got {self.bin_count!r}")
        if not (self.y_min < self.y_max):
            raise ParameterError(f"need y_min < y_max, got [{self.y_min}, {self.y_max})")

    @property
    def bin_width(self) -> float:
        return (self.y_max - self.y_min) / self.bin_count

    @property
    def centers(self) -> np.ndarray:
        return _frozen_array(self.y_min + (np.arange(self.bin_count) + 0.5) * self.bin_width)

    @property
    def lower_edges(self) -> np.ndarray:
        return _frozen_array(self.y_min + np.arange(self.bin_count) * self.bin_width)

    @property
    def upper_edges(self) -> np.ndarray:
        return _frozen_array(self.y_min + (np.arange(self.bin_count) + 1) * self.bin_width)

    def contains(self, bpm: float) -> bool:
        return self.y_min <= bpm < self.y_max

    def bin_index(self, bpm: float) -> int:
        """Index of the half-open bin holding `bpm` (boundary -> upper bin)."""
        if not self.contains(bpm):
            raise RangeError(
                f"{bpm} BPM is outside the grid [{self.y_min}, {self.y_max})"
            )
        i = int(math.floor((bpm - self.y_min) / self.bin_width))
        # float rounding can push a value just below y_max into bin_count
        return min(i, self.bin_count - 1)


class DistStats(NamedTuple):
    mean: float
    entropy: float
    std: float


@dataclass(frozen=True)
class BinDistribution:
    """Probability vector over the bins of a grid."""

    grid: HrGrid
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != (self.grid.bin_count,):
            raise ParameterError(
                f"expected {self.grid.bin_count} probabilities, got shape {probs.shape}"
            )
        if not np.all(np.isfinite(probs)):
            raise ParameterError("probabilities must be finite")
        if np.any(probs < 0.0):
            raise ParameterError(f"negative probability entry: min={probs.min()}")
        total = float(probs.sum())
        if abs(total - 1.0) > _PROB_SUM_TOL:
            raise ParameterError(f"probabilities sum to {total}, expected 1 +/- {_PROB_SUM_TOL}")
        probs = probs.copy()
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, grid: HrGrid) -> "BinDistribution":
        return cls(grid, np.full(grid.bin_count, 1.0 / grid.bin_count))

    @classmethod
    def one_hot(cls, grid: HrGrid, index: int) -> "BinDistribution":
        if not 0 <= index < grid.bin_count:
            raise ParameterError(f"bin index {index} outside 0..{grid.bin_count - 1}")
        probs = np.zeros(grid.bin_count)
        probs[index] = 1.0
        return cls(grid, probs)

    def mode_index(self) -> int:
        return int(np.argmax(self.probs))


def gaussian_label(grid: HrGrid, y: float, sigma_y: float = DEFAULT_SIGMA_Y) -> BinDistribution:
    """Soft label: Gaussian density at the bin centers, renormalized.

    Evaluating N(y, sigma_y^2) at the centers and normalizing spreads a
    scalar target over neighbouring bins; as sigma_y -> 0 this tends to a
    one-hot vector at the bin containing y.
    """
    if sigma_y <= 0:
        raise ParameterError(f"sigma_y must be positive, got {sigma_y}")
    if not grid.contains(y):
        raise RangeError(f"{y} BPM is outside the grid [{grid.y_min}, {grid.y_max})")
    z = (grid.centers - y) / sigma_y
    logw = -0.5 * z * z
    logw -= logw.max()  # keeps the nearest bin finite even for tiny sigma_y
    w = np.exp(logw)
    return BinDistribution(grid, w / w.sum())


def dist_stats(d: BinDistribution) -> DistStats:
    """Mean BPM, Shannon entropy (nats, 0 ln 0 = 0) and std in BPM."""
    p = d.probs
    centers = d.grid.centers
    mean = float(p @ centers)
    pos = p > 0.0
    entropy = float(-(p[pos] @ np.log(p[pos])))
    var = float(p @ (centers - mean) ** 2)
    return DistStats(mean=mean, entropy=entropy, std=math.sqrt(max(var, 0.0)))


def upsample(d: BinDistribution, m: int) -> BinDistribution:
    """Re-express a distribution on a finer grid over the same range.

    Probabilities are linearly interpolated between coarse bin centers
    (constant beyond the outermost centers), clipped at zero and
    renormalized.  Used to build fine-grained credible regions.
    """
    coarse = d.grid
    if m < coarse.bin_count:
        raise ParameterError(
            f"target bin count {m} is smaller than the source ({coarse.bin_count})"
        )
    fine = HrGrid(m, coarse.y_min, coarse.y_max)
    vals = np.interp(fine.centers, coarse.centers, d.probs)
    vals = np.clip(vals, 0.0, None)
    return BinDistribution(fine, vals / vals.sum())
