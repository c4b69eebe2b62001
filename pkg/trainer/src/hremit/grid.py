"""Label grid, soft targets and the cross-entropy loss.

The trainer casts HR regression as classification over linearly spaced
bins.  A scalar ground truth y becomes a discretized Gaussian: the density
N(y, sigma_y^2) evaluated at the bin centers and renormalized, which
smears the target over neighbouring bins and regularizes the output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

LOSS_FLOOR = 1e-12


@dataclass(frozen=True)
class LabelGrid:
    """Linearly spaced half-open HR bins on [y_min, y_max)."""

    bins: int = 64
    y_min: float = 30.0
    y_max: float = 210.0

    def __post_init__(self):
        if self.bins < 2:
            raise ConfigError(f"need at least 2 bins, got {self.bins}")
        if not self.y_min < self.y_max:
            raise ConfigError(f"need y_min < y_max, got [{self.y_min}, {self.y_max})")

    @property
    def width(self) -> float:
        return (self.y_max - self.y_min) / self.bins

    @property
    def centers(self) -> np.ndarray:
        return self.y_min + (np.arange(self.bins) + 0.5) * self.width

    def contains(self, y: float) -> bool:
        return self.y_min <= y < self.y_max


@dataclass(frozen=True)
class GridDist:
    """A probability vector over the bins of one grid."""

    grid: LabelGrid
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.shape != (self.grid.bins,):
            raise ConfigError(f"expected {self.grid.bins} probabilities, got shape {p.shape}")
        if np.any(p < 0.0) or not np.all(np.isfinite(p)):
            raise ConfigError("probabilities must be finite and >= 0")
        if abs(p.sum() - 1.0) > 1e-6:
            raise ConfigError(f"probabilities sum to {p.sum()}, expected 1")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)


def gaussian_target(grid: LabelGrid, y: float, sigma_y: float) -> GridDist:
    """Discretized Gaussian label: density at bin centers, renormalized."""
    if sigma_y <= 0:
        raise ConfigError(f"sigma_y must be positive, got {sigma_y}")
    if not grid.contains(y):
        raise ConfigError(f"{y} BPM lies outside the grid [{grid.y_min}, {grid.y_max})")
    z = (grid.centers - y) / sigma_y
    logw = -0.5 * z * z
    logw -= logw.max()  # nearest bin stays finite even for tiny sigma_y
    w = np.exp(logw)
    return GridDist(grid, w / w.sum())


def entropy(dist: GridDist) -> float:
    """Shannon entropy in nats, with the 0 * ln 0 = 0 convention."""
    nz = dist.probs[dist.probs > 0.0]
    return float(-(nz * np.log(nz)).sum())


def cross_entropy(target: GridDist, predicted: GridDist,
                  floor: float = LOSS_FLOOR) -> float:
    """Soft-label cross entropy -sum(p * ln p_hat), p_hat floored at `floor`.

    By Gibbs' inequality the result is >= entropy(target), with equality
    exactly when the prediction matches the target.
    """
    if target.grid != predicted.grid:
        raise ConfigError(
            f"grids differ: {target.grid} vs {predicted.grid}; "
            "target and prediction must share one"
        )
    logq = np.log(np.maximum(predicted.probs, floor))
    return float(-(target.probs * logq).sum())
