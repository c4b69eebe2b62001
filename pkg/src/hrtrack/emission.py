"""Per-window evidence: p(window | HR bin) up to normalization.

Two sources are provided.  The spectral baseline scores each HR bin by the
motion-suppressed PPG magnitude at the matching frequency; a file-backed
series carries distributions produced by an externally trained model.  The
emission file format is the hand-off boundary for such models.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import FormatError, ParameterError
from .frontend import (
    SPEC_BIN_HI,
    SPEC_BIN_LO,
    SPEC_BINS,
    SPEC_RATE_HZ,
    FFT_LEN,
    WIN_SHIFT_S,
    SignalWindow,
)
from .grid import BinDistribution, HrGrid

DEFAULT_BETA = 2.0
DEFAULT_ACCEL_WEIGHT = 1.0
DEFAULT_FLOOR = 1e-6

_ROW_SUM_TOL = 1e-6

#: BPM at the center frequency of each spectrogram bin
SPEC_BIN_BPM = 60.0 * np.arange(SPEC_BIN_LO, SPEC_BIN_HI + 1) * SPEC_RATE_HZ / FFT_LEN


class EmissionSource(ABC):
    """Anything that can turn a window into evidence over HR bins."""

    @property
    @abstractmethod
    def grid(self) -> HrGrid:
        ...

    @abstractmethod
    def emit(self, window: SignalWindow) -> BinDistribution:
        ...


def spectral_emission(window: SignalWindow, grid: HrGrid, beta: float = DEFAULT_BETA,
                      accel_weight: float = DEFAULT_ACCEL_WEIGHT,
                      floor: float = DEFAULT_FLOOR) -> BinDistribution:
    """Baseline evidence from motion-suppressed spectral magnitudes.

    Per sub-window, the accelerometer magnitude is subtracted from the PPG
    magnitude (clipped at zero) to discount motion peaks; scores are averaged
    over sub-windows, scaled to a unit maximum, floored and raised to `beta`.
    A window with no spectral content yields the uniform distribution.
    """
    if beta <= 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    if accel_weight < 0:
        raise ParameterError(f"accel_weight must be >= 0, got {accel_weight}")
    if floor <= 0:
        raise ParameterError(f"floor must be positive, got {floor}")
    sg = window.spectrogram
    if sg.shape[1] != SPEC_BINS:
        raise ParameterError(
            f"expected {SPEC_BINS} spectral bins per sub-window, got {sg.shape[1]}"
        )
    suppressed = np.clip(sg[:, :, 0] - accel_weight * sg[:, :, 1], 0.0, None)
    scores = suppressed.mean(axis=0)
    if grid.bin_count != SPEC_BINS:
        # spectral bins do not line up 1:1; re-bin by interpolating the score
        # profile (in BPM) onto the target grid centers
        scores = np.interp(grid.centers, SPEC_BIN_BPM, scores)
    peak = scores.max()
    if peak > 0.0:
        scores = scores / peak  # unit scale so the floor acts the same at any gain
    weights = (scores + floor) ** beta
    return BinDistribution(grid, weights / weights.sum())


class SpectralEmission(EmissionSource):
    """Emission source wrapping spectral_emission with fixed parameters."""

    def __init__(self, grid: HrGrid, beta: float = DEFAULT_BETA,
                 accel_weight: float = DEFAULT_ACCEL_WEIGHT, floor: float = DEFAULT_FLOOR):
        self._grid = grid
        self.beta = beta
        self.accel_weight = accel_weight
        self.floor = floor

    @property
    def grid(self) -> HrGrid:
        return self._grid

    def emit(self, window: SignalWindow) -> BinDistribution:
        return spectral_emission(window, self._grid, self.beta, self.accel_weight, self.floor)


@dataclass(frozen=True)
class EmissionSeries:
    """Evenly spaced sequence of per-window distributions."""

    grid: HrGrid
    t0: float
    dt: float
    probs: np.ndarray = field(repr=False)  # (steps, bin_count)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[1] != self.grid.bin_count:
            raise ParameterError(
                f"emission series must be (steps, {self.grid.bin_count}), got {probs.shape}"
            )
        if self.dt <= 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if probs.shape[0] == 0:
            raise ParameterError("emission series is empty")
        if np.any(probs < 0.0) or not np.all(np.isfinite(probs)):
            raise ParameterError("emission probabilities must be finite and >= 0")
        sums = probs.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise ParameterError(f"emission row {bad} sums to {sums[bad]}")
        probs = probs.copy()
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return self.probs.shape[0]

    def __getitem__(self, t: int) -> BinDistribution:
        return BinDistribution(self.grid, self.probs[t])

    def __iter__(self) -> Iterator[BinDistribution]:
        for row in self.probs:
            yield BinDistribution(self.grid, row)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))


def emissions_from_windows(windows: Sequence[SignalWindow], source: EmissionSource,
                           dt: float = WIN_SHIFT_S) -> EmissionSeries:
    """Run an emission source over consecutive windows; timestamps are window centers."""
    if not windows:
        raise ParameterError("no windows to emit from")
    probs = np.stack([source.emit(w).probs for w in windows])
    return EmissionSeries(grid=source.grid, t0=windows[0].center_time, dt=dt, probs=probs)


def save_emissions(series: EmissionSeries, path) -> None:
    """Write an emission series in the plain-text hand-off format."""
    lines = [
        f"bins={series.grid.bin_count}",
        f"y_min={series.grid.y_min!r}",
        f"y_max={series.grid.y_max!r}",
        f"t0={series.t0!r}",
        f"dt={series.dt!r}",
    ]
    for row in series.probs:
        lines.append(" ".join(f"{v:.9g}" for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_emission_header(path) -> dict:
    """Header of an emission file: bins, y_min, y_max, t0, dt."""
    keys = ("bins", "y_min", "y_max", "t0", "dt")
    values = {}
    try:
        fh = open(path, "r", encoding="ascii")
    except OSError as exc:
        raise FormatError(f"cannot read emission file {path}: {exc}")
    with fh:
        for lineno, key in enumerate(keys, start=1):
            line = fh.readline().rstrip("\n")
            prefix = key + "="
            if not line.startswith(prefix):
                raise FormatError(f"line {lineno}: expected '{key}=<value>', got {line!r}")
            try:
                values[key] = float(line[len(prefix):])
            except ValueError:
                raise FormatError(f"line {lineno}: cannot parse {key} from {line!r}")
    values["bins"] = int(values["bins"])
    return values


def iter_emission_rows(path, grid: HrGrid | None = None):
    """Stream validated probability rows from an emission file.

    Yields plain arrays (renormalized after the text round-trip) so callers
    can filter arbitrarily long files without materializing them.
    """
    header = read_emission_header(path)
    file_grid = HrGrid(header["bins"], header["y_min"], header["y_max"])
    if grid is not None and grid != file_grid:
        raise FormatError(
            f"emission header describes bins={file_grid.bin_count} on "
            f"[{file_grid.y_min}, {file_grid.y_max}), expected bins={grid.bin_count} "
            f"on [{grid.y_min}, {grid.y_max})"
        )
    try:
        fh = open(path, "r", encoding="ascii")
    except OSError as exc:
        raise FormatError(f"cannot read emission file {path}: {exc}")
    with fh:
        for _ in range(5):
            fh.readline()
        for lineno, line in enumerate(fh, start=6):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != file_grid.bin_count:
                raise FormatError(
                    f"line {lineno}: expected {file_grid.bin_count} entries, got {len(parts)}"
                )
            try:
                row = np.array([float(p) for p in parts])
            except ValueError:
                raise FormatError(f"line {lineno}: non-numeric probability entry")
            if np.any(row < 0.0) or not np.all(np.isfinite(row)):
                raise FormatError(f"line {lineno}: probabilities must be finite and >= 0")
            s = row.sum()
            if abs(s - 1.0) > _ROW_SUM_TOL:
                raise FormatError(f"line {lineno}: row sums to {s}, expected 1 +/- {_ROW_SUM_TOL}")
            yield row / s  # restore the invariant exactly after text round-trip


def load_emissions(path, grid: HrGrid | None = None) -> EmissionSeries:
    """Read an emission file, validating every row against the distribution invariant."""
    header = read_emission_header(path)
    rows = list(iter_emission_rows(path, grid))
    if not rows:
        raise FormatError("emission file has a header but no probability rows")
    file_grid = HrGrid(header["bins"], header["y_min"], header["y_max"])
    return EmissionSeries(grid=file_grid, t0=header["t0"], dt=header["dt"], probs=np.stack(rows))
