"""Signal frontend: raw PPG/accelerometer sessions to model-ready windows.

A recording is cut into 20 s windows shifted by 2 s.  Each window gets two
views of the same signal:

* time domain: band-passed, per-channel z-scored, channel-averaged PPG
  resampled to 64 Hz (1280 samples);
* spectrogram: 7 overlapping 8 s sub-windows (2 s shift); per channel the
  sub-window is z-scored, resampled to 25 Hz (200 samples), zero-padded and
  transformed with a 535-point FFT.  Magnitudes at FFT bins 11..74 cover
  roughly 0.51-3.46 Hz, i.e. the 30-210 BPM band, one FFT bin per HR bin.
  PPG channels are averaged into plane 0, accelerometer channels into
  plane 1 (all zeros when no accelerometer was recorded).

The band-pass runs causally over the whole channel once; everything else
is computed per window.  Sub-windows are shared between overlapping
windows, so their spectra are computed once per session.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import InsufficientDataError, ParameterError, ValidationError

# window geometry (seconds)
WIN_LEN_S = 20.0
WIN_SHIFT_S = 2.0
SUB_WIN_S = 8.0
SUB_SHIFT_S = 2.0
SUB_COUNT = 7  # (20 - 8) / 2 + 1

# time-domain branch
TIME_RATE_HZ = 64.0
TIME_SAMPLES = 1280

# spectrogram branch
SPEC_RATE_HZ = 25.0
SPEC_SAMPLES = 200
FFT_LEN = 535
SPEC_BIN_LO = 11
SPEC_BIN_HI = 74  # inclusive
SPEC_BINS = SPEC_BIN_HI - SPEC_BIN_LO + 1  # 64

# band-pass defaults
BAND_LO_HZ = 0.1
BAND_HI_HZ = 18.0
BAND_ORDER = 4

_STD_EPS = 1e-8


def bandpass(x, fs: float, f_lo: float = BAND_LO_HZ, f_hi: float = BAND_HI_HZ,
             order: int = BAND_ORDER) -> np.ndarray:
    """Causal Butterworth band-pass. Corners must sit inside (0, fs/2)."""
    if not 0.0 < f_lo < f_hi < fs / 2.0:
        raise ParameterError(
            f"band-pass corners must satisfy 0 < {f_lo} < {f_hi} < fs/2 = {fs / 2.0}"
        )
    if order < 1:
        raise ParameterError(f"filter order must be >= 1, got {order}")
    sos = sps.butter(order, [f_lo, f_hi], btype="bandpass", fs=fs, output="sos")
    return sps.sosfilt(sos, np.asarray(x, dtype=np.float64))


def bandpass_response(fs: float, freqs, f_lo: float = BAND_LO_HZ,
                      f_hi: float = BAND_HI_HZ, order: int = BAND_ORDER) -> np.ndarray:
    """|H(f)| of the filter bandpass() applies, for verification."""
    sos = sps.butter(order, [f_lo, f_hi], btype="bandpass", fs=fs, output="sos")
    _, h = sps.sosfreqz(sos, worN=np.atleast_1d(np.asarray(freqs, dtype=np.float64)), fs=fs)
    return np.abs(h)


def zscore(x) -> np.ndarray:
    """Zero-mean, unit-population-std; constant input maps to all zeros."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ParameterError("cannot z-score an empty signal")
    std = float(x.std())
    return (x - x.mean()) / max(std, _STD_EPS)


def resample(x, fs_in: float, fs_out: float) -> np.ndarray:
    """Linear-interpolation resampling onto a uniform grid spanning the same duration."""
    if fs_in <= 0 or fs_out <= 0:
        raise ParameterError(f"sampling rates must be positive, got {fs_in}, {fs_out}")
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ParameterError("cannot resample an empty signal")
    n_out = int(round(x.size * fs_out / fs_in))
    t_out = np.arange(n_out) / fs_out
    t_in = np.arange(x.size) / fs_in
    return np.interp(t_out, t_in, x)


@dataclass(frozen=True)
class RawSession:
    """A recording: PPG channels, optional accelerometer channels, HR labels."""

    ppg: np.ndarray                      # (n_ppg_channels, n_samples)
    ppg_rate_hz: float
    label_times: np.ndarray
    label_bpm: np.ndarray
    acc: np.ndarray | None = None        # (n_acc_channels, n_samples)
    acc_rate_hz: float | None = None
    label_tags: tuple[str, ...] | None = None
    ppg_names: tuple[str, ...] = ()
    acc_names: tuple[str, ...] = ()
    name: str = "session"

    def __post_init__(self):
        ppg = np.atleast_2d(np.asarray(self.ppg, dtype=np.float64))
        if ppg.shape[0] < 1 or ppg.shape[1] < 2:
            raise ValidationError(f"need at least one PPG channel with samples, got {ppg.shape}")
        if self.ppg_rate_hz is None or self.ppg_rate_hz <= 0:
            raise ValidationError(f"ppg_rate_hz must be positive, got {self.ppg_rate_hz}")
        object.__setattr__(self, "ppg", ppg)
        if self.acc is not None:
            acc = np.atleast_2d(np.asarray(self.acc, dtype=np.float64))
            if self.acc_rate_hz is None or self.acc_rate_hz <= 0:
                raise ValidationError("accelerometer channels present but acc_rate_hz missing")
            object.__setattr__(self, "acc", acc)
        times = np.asarray(self.label_times, dtype=np.float64)
        bpm = np.asarray(self.label_bpm, dtype=np.float64)
        if times.shape != bpm.shape or times.ndim != 1:
            raise ValidationError("label_times and label_bpm must be 1-D and equally long")
        if times.size >= 2 and np.any(np.diff(times) <= 0):
            raise ValidationError("label times must be strictly increasing")
        if self.label_tags is not None and len(self.label_tags) != times.size:
            raise ValidationError("label_tags length must match label count")
        object.__setattr__(self, "label_times", times)
        object.__setattr__(self, "label_bpm", bpm)

    @property
    def duration_s(self) -> float:
        dur = self.ppg.shape[1] / self.ppg_rate_hz
        if self.acc is not None:
            dur = min(dur, self.acc.shape[1] / self.acc_rate_hz)
        return dur

    def truth_at(self, times) -> np.ndarray:
        """Ground-truth BPM at arbitrary times (linear interpolation)."""
        return np.interp(np.asarray(times, dtype=np.float64), self.label_times, self.label_bpm)

    def tag_at(self, t: float) -> str | None:
        if self.label_tags is None:
            return None
        idx = int(np.argmin(np.abs(self.label_times - t)))
        return self.label_tags[idx]


@dataclass(frozen=True)
class SignalWindow:
    """One analysis window with its two signal views."""

    start_time: float
    time_domain: np.ndarray = field(repr=False)   # (TIME_SAMPLES,)
    spectrogram: np.ndarray = field(repr=False)   # (SUB_COUNT, SPEC_BINS, 2)
    duration_s: float = WIN_LEN_S

    def __post_init__(self):
        td = np.asarray(self.time_domain, dtype=np.float64)
        sg = np.asarray(self.spectrogram, dtype=np.float64)
        if td.ndim != 1:
            raise ValidationError(f"time_domain must be 1-D, got shape {td.shape}")
        if sg.ndim != 3 or sg.shape[2] != 2:
            raise ValidationError(f"spectrogram must be (sub-windows, bins, 2), got {sg.shape}")
        if not (np.all(np.isfinite(td)) and np.all(np.isfinite(sg))):
            raise ValidationError("window contains non-finite samples")
        if np.any(sg < 0.0):
            raise ValidationError("spectrogram magnitudes must be non-negative")
        object.__setattr__(self, "time_domain", td)
        object.__setattr__(self, "spectrogram", sg)

    @property
    def center_time(self) -> float:
        return self.start_time + self.duration_s / 2.0


def _slice(x: np.ndarray, fs: float, t0: float, length_s: float) -> np.ndarray:
    i0 = int(round(t0 * fs))
    n = int(round(length_s * fs))
    if i0 < 0 or i0 + n > x.size:
        raise InsufficientDataError(
            f"window [{t0}, {t0 + length_s}) s needs samples {i0}..{i0 + n} "
            f"but the channel has {x.size}"
        )
    return x[i0:i0 + n]


def _subwindow_spectra(channels: np.ndarray, fs: float, n_sub: int) -> np.ndarray:
    """Per-sub-window band magnitudes, averaged across channels. (n_sub, SPEC_BINS)."""
    out = np.zeros((n_sub, SPEC_BINS))
    for m in range(n_sub):
        t0 = m * SUB_SHIFT_S
        acc = np.zeros(SPEC_BINS)
        for ch in channels:
            seg = zscore(_slice(ch, fs, t0, SUB_WIN_S))
            seg = resample(seg, fs, SPEC_RATE_HZ)
            spec = np.abs(np.fft.rfft(seg, n=FFT_LEN))
            acc += spec[SPEC_BIN_LO:SPEC_BIN_HI + 1]
        out[m] = acc / channels.shape[0]
    return out


def window_count(duration_s: float, win_len: float = WIN_LEN_S,
                 shift: float = WIN_SHIFT_S) -> int:
    return int(math.floor((duration_s - win_len) / shift + 1e-9)) + 1


def make_windows(session: RawSession, win_len: float = WIN_LEN_S,
                 shift: float = WIN_SHIFT_S, f_lo: float = BAND_LO_HZ,
                 f_hi: float = BAND_HI_HZ, order: int = BAND_ORDER) -> list[SignalWindow]:
    """Cut a session into windows and compute both signal views for each."""
    duration = session.duration_s
    if duration < win_len:
        raise InsufficientDataError(
            f"session lasts {duration:.1f} s, shorter than one {win_len:.0f} s window"
        )
    n_win = window_count(duration, win_len, shift)
    n_sub_per_win = int(math.floor((win_len - SUB_WIN_S) / SUB_SHIFT_S + 1e-9)) + 1
    n_sub = n_win - 1 + n_sub_per_win  # shared overlapping sub-windows

    # spectrogram planes over the raw (unfiltered) channels
    ppg_plane = _subwindow_spectra(session.ppg, session.ppg_rate_hz, n_sub)
    if session.acc is not None:
        acc_plane = _subwindow_spectra(session.acc, session.acc_rate_hz, n_sub)
    else:
        acc_plane = np.zeros_like(ppg_plane)

    # causal band-pass once per PPG channel, then window-local processing
    filtered = np.stack([bandpass(ch, session.ppg_rate_hz, f_lo, f_hi, order)
                         for ch in session.ppg])

    windows = []
    for k in range(n_win):
        t0 = k * shift
        parts = [zscore(_slice(ch, session.ppg_rate_hz, t0, win_len)) for ch in filtered]
        avg = np.mean(parts, axis=0)
        td = resample(avg, session.ppg_rate_hz, TIME_RATE_HZ)
        sg = np.stack([ppg_plane[k:k + n_sub_per_win], acc_plane[k:k + n_sub_per_win]], axis=-1)
        windows.append(SignalWindow(start_time=t0, time_domain=td, spectrogram=sg,
                                    duration_s=win_len))
    return windows
