"""Training-time augmentation: random time stretches and input noise.

Stretching the time axis of a window by a factor s slows (s > 1) or speeds
(s < 1) the signal content, so every frequency inside it scales by 1/s and
the HR label must be rescaled to y / s.  The stretch is applied on the raw
slices, before filtering and feature extraction, so the time-domain and
spectrogram branches stay consistent with each other.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import ConfigError
from .frontend import RawWindow, _fit_length
from .grid import LabelGrid

MAX_STRETCH = 0.25
NOISE_STD = 0.25

log = logging.getLogger("hremit")


def _stretch_channel(x: np.ndarray, s: float) -> np.ndarray:
    """Resample one channel's time axis by s, refit to the original length."""
    n = x.size
    n_out = max(int(round(n * s)), 2)
    positions = np.arange(n_out) / s  # sample i of the output reads x at i/s
    return _fit_length(np.interp(positions, np.arange(n), x), n)


def stretch(window: RawWindow, s: float) -> RawWindow:
    """Deterministic time stretch of every channel; label becomes y / s."""
    if s <= 0:
        raise ConfigError(f"stretch factor must be positive, got {s}")
    ppg = np.stack([_stretch_channel(ch, s) for ch in window.ppg])
    acc = None
    if window.acc is not None:
        acc = np.stack([_stretch_channel(ch, s) for ch in window.acc])
    return RawWindow(start_time=window.start_time, ppg=ppg,
                     ppg_rate_hz=window.ppg_rate_hz, acc=acc,
                     acc_rate_hz=window.acc_rate_hz,
                     label_bpm=window.label_bpm / s,
                     duration_s=window.duration_s)


def _add_noise(window: RawWindow, rng: np.random.Generator,
               noise_std: float) -> RawWindow:
    if noise_std == 0.0:
        return window
    ppg = window.ppg + rng.normal(0.0, noise_std, window.ppg.shape)
    acc = None
    if window.acc is not None:
        acc = window.acc + rng.normal(0.0, noise_std, window.acc.shape)
    return RawWindow(start_time=window.start_time, ppg=ppg,
                     ppg_rate_hz=window.ppg_rate_hz, acc=acc,
                     acc_rate_hz=window.acc_rate_hz,
                     label_bpm=window.label_bpm, duration_s=window.duration_s)


def augment(window: RawWindow, grid: LabelGrid, rng: np.random.Generator,
            max_stretch: float = MAX_STRETCH,
            noise_std: float = NOISE_STD) -> RawWindow | None:
    """One random augmented variant, or None when the label leaves the grid."""
    if not 0.0 <= max_stretch <= MAX_STRETCH:
        raise ConfigError(f"max_stretch must lie in [0, {MAX_STRETCH}], got {max_stretch}")
    if noise_std < 0:
        raise ConfigError(f"noise_std must be >= 0, got {noise_std}")
    s = float(rng.uniform(1.0 / (1.0 + max_stretch), 1.0 + max_stretch))
    out = stretch(window, s) if s != 1.0 else window
    if not grid.contains(out.label_bpm):
        log.info("skipping window at t=%.1f s: stretched label %.1f BPM leaves "
                 "[%g, %g)", window.start_time, out.label_bpm, grid.y_min, grid.y_max)
        return None
    return _add_noise(out, rng, noise_std)
