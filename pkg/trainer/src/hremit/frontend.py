"""Session loading and feature extraction for the emission trainer.

Consumes the on-disk session directory convention used across this repo:

* ``meta.txt``        key=value lines (ppg_rate_hz, acc_rate_hz, channel names);
* ``signals_ppg.csv`` header row, then time_s plus one column per channel;
* ``signals_acc.csv`` same layout, optional;
* ``labels.csv``      time_s, hr_bpm and an optional tag column.

A recording is cut into 20 s windows shifted by 2 s.  Training operates on
raw window slices so augmentation can stretch the signals before any
filtering; `featurize` then produces the two network inputs per window:

* time domain: band-passed, z-scored, channel-averaged PPG at 64 Hz
  (1280 samples);
* spectrogram: 7 overlapping 8 s sub-windows, each z-scored, resampled to
  25 Hz and transformed with a 535-point FFT; magnitudes at FFT bins 11..74
  give 64 frequency bins spanning roughly 0.51-3.46 Hz.  Plane 0 averages
  the PPG channels, plane 1 the accelerometer channels (zeros without one).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .errors import FormatError

WIN_LEN_S = 20.0
WIN_SHIFT_S = 2.0
SUB_WIN_S = 8.0
SUB_SHIFT_S = 2.0
SUB_COUNT = 7

TIME_RATE_HZ = 64.0
TIME_SAMPLES = 1280

SPEC_RATE_HZ = 25.0
FFT_LEN = 535
SPEC_BIN_LO = 11
SPEC_BIN_HI = 74  # inclusive
SPEC_BINS = SPEC_BIN_HI - SPEC_BIN_LO + 1

BAND_LO_HZ = 0.1
BAND_HI_HZ = 18.0
BAND_ORDER = 4

_STD_EPS = 1e-8


@dataclass(frozen=True)
class LabeledSession:
    """One recording with interpolatable HR labels."""

    name: str
    ppg: np.ndarray                  # (n_channels, n_samples)
    ppg_rate_hz: float
    acc: np.ndarray | None
    acc_rate_hz: float | None
    label_times: np.ndarray
    label_bpm: np.ndarray

    @property
    def duration_s(self) -> float:
        return self.ppg.shape[1] / self.ppg_rate_hz

    def truth_at(self, times) -> np.ndarray:
        return np.interp(np.asarray(times, dtype=np.float64),
                         self.label_times, self.label_bpm)


@dataclass(frozen=True)
class RawWindow:
    """Unprocessed slices of one analysis window, ready for augmentation."""

    start_time: float
    ppg: np.ndarray                  # (n_channels, n_ppg_samples)
    ppg_rate_hz: float
    acc: np.ndarray | None
    acc_rate_hz: float | None
    label_bpm: float
    duration_s: float = WIN_LEN_S

    @property
    def center_time(self) -> float:
        return self.start_time + self.duration_s / 2.0


def _read_meta(path: Path) -> dict[str, str]:
    meta: dict[str, str] = {}
    try:
        fh = open(path, "r", encoding="ascii")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}")
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"{path} line {lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            meta[key.strip()] = value.strip()
    return meta


def _read_csv_columns(path: Path) -> np.ndarray:
    """All numeric columns of a headered CSV as a (n_cols, n_rows) array."""
    try:
        fh = open(path, "r", encoding="ascii", newline="")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}")
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise FormatError(f"{path}: expected a header with >= 2 columns")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(
                    f"{path} line {lineno}: expected {len(header)} columns, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise FormatError(f"{path} line {lineno}: non-numeric value")
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64).T


def _read_labels(path: Path) -> tuple[np.ndarray, np.ndarray]:
    try:
        fh = open(path, "r", encoding="ascii", newline="")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}")
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise FormatError(f"{path}: expected header time_s,hr_bpm[,tag]")
        times, bpm = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                times.append(float(row[0]))
                bpm.append(float(row[1]))
            except (ValueError, IndexError):
                raise FormatError(f"{path} line {lineno}: cannot parse time/bpm")
    if not times:
        raise FormatError(f"{path}: no labels")
    t = np.asarray(times)
    if np.any(np.diff(t) <= 0):
        raise FormatError(f"{path}: label times must increase strictly")
    return t, np.asarray(bpm)


def load_session(dirpath) -> LabeledSession:
    """Read one session directory into memory."""
    d = Path(dirpath)
    if not d.is_dir():
        raise FormatError(f"{d} is not a session directory")
    meta = _read_meta(d / "meta.txt")
    if "ppg_rate_hz" not in meta:
        raise FormatError(f"{d}/meta.txt: missing ppg_rate_hz")
    try:
        ppg_rate = float(meta["ppg_rate_hz"])
    except ValueError:
        raise FormatError(f"{d}/meta.txt: cannot parse ppg_rate_hz={meta['ppg_rate_hz']!r}")
    ppg_cols = _read_csv_columns(d / "signals_ppg.csv")
    ppg = ppg_cols[1:]  # drop the time column; sampling is uniform by convention

    acc = None
    acc_rate = None
    acc_path = d / "signals_acc.csv"
    if acc_path.exists():
        if "acc_rate_hz" not in meta:
            raise FormatError(f"{d}/meta.txt: accelerometer present but acc_rate_hz missing")
        try:
            acc_rate = float(meta["acc_rate_hz"])
        except ValueError:
            raise FormatError(f"{d}/meta.txt: cannot parse acc_rate_hz={meta['acc_rate_hz']!r}")
        acc = _read_csv_columns(acc_path)[1:]

    label_times, label_bpm = _read_labels(d / "labels.csv")
    return LabeledSession(name=d.name, ppg=ppg, ppg_rate_hz=ppg_rate,
                          acc=acc, acc_rate_hz=acc_rate,
                          label_times=label_times, label_bpm=label_bpm)


def bandpass(x: np.ndarray, fs: float, f_lo: float = BAND_LO_HZ,
             f_hi: float = BAND_HI_HZ, order: int = BAND_ORDER) -> np.ndarray:
    """Causal Butterworth band-pass."""
    sos = sps.butter(order, [f_lo, f_hi], btype="bandpass", fs=fs, output="sos")
    return sps.sosfilt(sos, np.asarray(x, dtype=np.float64))


def zscore(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    std = float(x.std())
    return (x - x.mean()) / max(std, _STD_EPS)


def resample(x: np.ndarray, fs_in: float, fs_out: float) -> np.ndarray:
    """Linear-interpolation resampling spanning the same duration."""
    n_out = int(round(x.size * fs_out / fs_in))
    t_out = np.arange(n_out) / fs_out
    t_in = np.arange(x.size) / fs_in
    return np.interp(t_out, t_in, x)


def window_count(duration_s: float) -> int:
    return int(math.floor((duration_s - WIN_LEN_S) / WIN_SHIFT_S + 1e-9)) + 1


def cut_windows(session: LabeledSession) -> list[RawWindow]:
    """Slice a session into raw 20 s windows labelled at their centers."""
    duration = session.duration_s
    if duration < WIN_LEN_S:
        raise FormatError(
            f"session {session.name} lasts {duration:.1f} s, "
            f"shorter than one {WIN_LEN_S:.0f} s window"
        )
    windows = []
    for k in range(window_count(duration)):
        t0 = k * WIN_SHIFT_S
        i0 = int(round(t0 * session.ppg_rate_hz))
        n = int(round(WIN_LEN_S * session.ppg_rate_hz))
        ppg = session.ppg[:, i0:i0 + n]
        acc = None
        if session.acc is not None:
            j0 = int(round(t0 * session.acc_rate_hz))
            m = int(round(WIN_LEN_S * session.acc_rate_hz))
            acc = session.acc[:, j0:j0 + m]
        label = float(session.truth_at(t0 + WIN_LEN_S / 2.0))
        windows.append(RawWindow(start_time=t0, ppg=ppg, ppg_rate_hz=session.ppg_rate_hz,
                                 acc=acc, acc_rate_hz=session.acc_rate_hz, label_bpm=label))
    return windows


def _fit_length(x: np.ndarray, n: int) -> np.ndarray:
    """Center-crop or reflect-pad a 1-D signal to exactly n samples."""
    if x.size == n:
        return x
    if x.size > n:
        lead = (x.size - n) // 2
        return x[lead:lead + n]
    pad = n - x.size
    return np.pad(x, (pad // 2, pad - pad // 2), mode="reflect")


def _sub_spectra(channels: np.ndarray, fs: float) -> np.ndarray:
    """(SUB_COUNT, SPEC_BINS) band magnitudes averaged across channels."""
    out = np.zeros((SUB_COUNT, SPEC_BINS))
    n_sub = int(round(SUB_WIN_S * fs))
    for m in range(SUB_COUNT):
        i0 = int(round(m * SUB_SHIFT_S * fs))
        acc = np.zeros(SPEC_BINS)
        for ch in channels:
            seg = zscore(ch[i0:i0 + n_sub])
            seg = resample(seg, fs, SPEC_RATE_HZ)
            spec = np.abs(np.fft.rfft(seg, n=FFT_LEN))
            acc += spec[SPEC_BIN_LO:SPEC_BIN_HI + 1]
        out[m] = acc / channels.shape[0]
    return out


def featurize(window: RawWindow) -> tuple[np.ndarray, np.ndarray]:
    """Network inputs for one window: (time_domain, spectrogram).

    Returns a (TIME_SAMPLES,) vector and a (SUB_COUNT, SPEC_BINS, 2) tensor.
    """
    filtered = [zscore(bandpass(ch, window.ppg_rate_hz)) for ch in window.ppg]
    avg = np.mean(filtered, axis=0)
    td = _fit_length(resample(avg, window.ppg_rate_hz, TIME_RATE_HZ), TIME_SAMPLES)

    ppg_plane = _sub_spectra(window.ppg, window.ppg_rate_hz)
    if window.acc is not None and window.acc.size:
        acc_plane = _sub_spectra(window.acc, window.acc_rate_hz)
    else:
        acc_plane = np.zeros_like(ppg_plane)
    sg = np.stack([ppg_plane, acc_plane], axis=-1)
    return td, sg
