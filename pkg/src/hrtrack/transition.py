"""Heart-rate transition model.

Successive heart-rate readings are modelled through their log ratio
ln(y_t / y_{t-1}) ~ N(mu, sigma^2): relative changes, not absolute ones,
are what stays stationary across slow and fast heart rates.  The fitted
Gaussian is discretized onto the grid by integrating it between the
ratio bounds each pair of bins can produce.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import norm

from .errors import (
    DomainError,
    FormatError,
    InsufficientDataError,
    ParameterError,
)
from .grid import HrGrid

SIGMA_FLOOR = 1e-4

_ROW_SUM_TOL = 1e-6


@dataclass(frozen=True)
class TransitionModel:
    grid: HrGrid
    mu: float
    sigma: float
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.float64)
        c = self.grid.bin_count
        if mat.shape != (c, c):
            raise ParameterError(f"transition matrix must be {c}x{c}, got {mat.shape}")
        if np.any(mat < 0.0) or not np.all(np.isfinite(mat)):
            raise ParameterError("transition matrix entries must be finite and >= 0")
        sums = mat.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > _ROW_SUM_TOL):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise ParameterError(f"transition row {bad} sums to {sums[bad]}, expected 1")
        mat = mat.copy()
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)


def fit_transition(sequences: Iterable[Sequence[float]]) -> tuple[float, float]:
    """Fit (mu, sigma) of the log-ratio Gaussian from HR label sequences.

    Pools ln(y_t / y_{t-1}) over all consecutive pairs of every sequence.
    sigma is the population standard deviation, floored at SIGMA_FLOOR so
    the discretized kernel never degenerates.
    """
    ratios = []
    for seq in sequences:
        arr = np.asarray(seq, dtype=np.float64)
        if arr.size and np.any(arr <= 0.0):
            raise DomainError(f"non-positive heart rate in sequence: min={arr.min()}")
        if arr.size >= 2:
            ratios.append(np.log(arr[1:] / arr[:-1]))
    if not ratios:
        raise InsufficientDataError("no consecutive label pairs to fit a transition model")
    pooled = np.concatenate(ratios)
    mu = float(pooled.mean())
    sigma = max(float(pooled.std()), SIGMA_FLOOR)
    return mu, sigma


def _ratio_mass(mu: float, sigma: float, grid: HrGrid) -> np.ndarray:
    """Unnormalized kernel: Gaussian mass between the per-bin-pair ratio bounds.

    Row i (previous bin), column j (next bin).  The ratio y_t / y_{t-1} for
    (i, j) ranges from lower_j/upper_i to upper_j/lower_i; the log of that
    interval is integrated under N(mu, sigma^2).  Neighbouring intervals
    overlap slightly, which is why rows are normalized afterwards.
    """
    lo = grid.lower_edges
    hi = grid.upper_edges
    z_hi = (np.log(hi[None, :] / lo[:, None]) - mu) / sigma
    z_lo = (np.log(lo[None, :] / hi[:, None]) - mu) / sigma
    return np.clip(norm.cdf(z_hi) - norm.cdf(z_lo), 0.0, None)


def discretize_transition(mu: float, sigma: float, grid: HrGrid) -> TransitionModel:
    """Row-stochastic transition matrix for the fitted log-ratio Gaussian."""
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    raw = _ratio_mass(mu, sigma, grid)
    sums = raw.sum(axis=1, keepdims=True)
    if np.any(sums <= 0.0):
        raise ParameterError(
            "a transition row received zero mass; sigma is too small for this grid"
        )
    return TransitionModel(grid=grid, mu=mu, sigma=sigma, matrix=raw / sums)


def save_transition(model: TransitionModel, path) -> None:
    """Write a transition model as a plain-text artifact."""
    lines = [
        f"bins={model.grid.bin_count}",
        f"y_min={float(model.grid.y_min)!r}",
        f"y_max={float(model.grid.y_max)!r}",
        f"mu={float(model.mu)!r}",
        f"sigma={float(model.sigma)!r}",
    ]
    for row in model.matrix:
        lines.append(" ".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_header_line(line: str, key: str, lineno: int):
    prefix = key + "="
    if not line.startswith(prefix):
        raise FormatError(f"line {lineno}: expected '{key}=<value>', got {line!r}")
    try:
        value = float(line[len(prefix):])
    except ValueError:
        raise FormatError(f"line {lineno}: cannot parse {key} value {line[len(prefix):]!r}")
    return value


def load_transition(path, grid: HrGrid | None = None) -> TransitionModel:
    """Read a transition artifact back; validates shape and row sums.

    If `grid` is given, the artifact header must describe the same grid.
    """
    try:
        with open(path, "r", encoding="ascii") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError as exc:
        raise FormatError(f"cannot read transition artifact {path}: {exc}")
    if len(lines) < 5:
        raise FormatError(f"truncated transition artifact: only {len(lines)} lines")
    bins = int(_parse_header_line(lines[0], "bins", 1))
    y_min = _parse_header_line(lines[1], "y_min", 2)
    y_max = _parse_header_line(lines[2], "y_max", 3)
    mu = _parse_header_line(lines[3], "mu", 4)
    sigma = _parse_header_line(lines[4], "sigma", 5)
    file_grid = HrGrid(bins, y_min, y_max)
    if grid is not None and grid != file_grid:
        raise FormatError(
            f"grid header mismatch: file has bins={bins} on [{y_min}, {y_max}), "
            f"expected bins={grid.bin_count} on [{grid.y_min}, {grid.y_max})"
        )
    rows = lines[5:]
    rows = rows[:-1] if rows and rows[-1] == "" else rows
    if len(rows) != bins:
        raise FormatError(f"expected {bins} matrix rows, found {len(rows)}")
    matrix = np.empty((bins, bins))
    for i, row in enumerate(rows):
        parts = row.split()
        if len(parts) != bins:
            raise FormatError(f"line {6 + i}: expected {bins} entries, got {len(parts)}")
        try:
            matrix[i] = [float(p) for p in parts]
        except ValueError:
            raise FormatError(f"line {6 + i}: non-numeric matrix entry")
        s = matrix[i].sum()
        if not np.isfinite(s) or abs(s - 1.0) > _ROW_SUM_TOL:
            raise FormatError(f"line {6 + i}: row sums to {s}, expected 1 +/- {_ROW_SUM_TOL}")
        matrix[i] /= s  # restore the invariant exactly after text round-trip
    return TransitionModel(grid=file_grid, mu=mu, sigma=sigma, matrix=matrix)
