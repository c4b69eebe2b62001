"""Synthetic PPG/accelerometer recordings with known ground truth.

The heart rate follows a clamped geometric random walk (log-ratio steps,
matching the transition model's assumptions).  The PPG is a harmonic pulse
at that instantaneous rate plus Gaussian sensor noise; optional motion
artifacts inject a strong off-frequency sinusoid during random bursts, and
can be mirrored into the accelerometer channels for suppression tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .frontend import RawSession

WALK_Y1_LO = 60.0
WALK_Y1_HI = 100.0
# keep the walk a safe margin inside the default 30-210 BPM grid
WALK_CLAMP_LO = 32.0
WALK_CLAMP_HI = 208.0


def synth_hr_walk(mu: float, sigma: float, steps: int, seed: int | None = None,
                  y_lo: float = WALK_CLAMP_LO, y_hi: float = WALK_CLAMP_HI) -> np.ndarray:
    """Geometric random walk: y_{t+1} = clamp(y_t * exp(eps), y_lo, y_hi)."""
    if steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps}")
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    if not y_lo < y_hi:
        raise ParameterError(f"need y_lo < y_hi, got [{y_lo}, {y_hi}]")
    rng = np.random.default_rng(seed)
    y = np.empty(steps)
    y[0] = rng.uniform(WALK_Y1_LO, WALK_Y1_HI)
    eps = rng.normal(mu, sigma, steps - 1)
    for t in range(1, steps):
        y[t] = min(max(y[t - 1] * np.exp(eps[t - 1]), y_lo), y_hi)
    return y


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for signal synthesis (the HR series itself is supplied)."""

    ppg_rate_hz: float = 64.0
    acc_rate_hz: float = 32.0
    n_ppg: int = 2
    n_acc: int = 3
    label_dt_s: float = 2.0
    harmonics: tuple[float, ...] = (1.0, 0.4, 0.2)
    noise_std: float = 0.1
    acc_noise_std: float = 0.5
    artifact_fraction: float = 0.0
    artifact_offset_bpm: float = 30.0
    artifact_amplitude: float = 2.0
    artifact_in_accel: bool = False
    artifact_burst_s: float = 10.0
    tag_labels: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.artifact_fraction <= 1.0:
            raise ParameterError(
                f"artifact_fraction must lie in [0, 1], got {self.artifact_fraction}"
            )
        if self.artifact_amplitude < 0 or any(a < 0 for a in self.harmonics):
            raise ParameterError("amplitudes must be >= 0")
        if not self.harmonics:
            raise ParameterError("need at least one harmonic amplitude")
        if self.ppg_rate_hz <= 0 or self.acc_rate_hz <= 0:
            raise ParameterError("sampling rates must be positive")
        if self.noise_std < 0 or self.acc_noise_std < 0:
            raise ParameterError("noise levels must be >= 0")
        if self.label_dt_s <= 0 or self.artifact_burst_s <= 0:
            raise ParameterError("label_dt_s and artifact_burst_s must be positive")
        if self.n_ppg < 1 or self.n_acc < 0:
            raise ParameterError("need >= 1 PPG channel and >= 0 accel channels")


def _phase(freq_hz: np.ndarray, rate: float) -> np.ndarray:
    """Integrated phase (rad) of a slowly varying frequency, phase 0 at t=0."""
    steps = 2.0 * np.pi * freq_hz / rate
    return np.concatenate(([0.0], np.cumsum(steps[:-1])))


def _burst_intervals(duration: float, fraction: float, burst_s: float,
                     rng: np.random.Generator) -> list[tuple[float, float]]:
    if fraction <= 0.0:
        return []
    n_slots = int(duration // burst_s)
    if n_slots == 0:
        return [(0.0, duration)] if fraction > 0 else []
    k = int(round(fraction * n_slots))
    k = min(max(k, 1), n_slots)
    slots = np.sort(rng.choice(n_slots, size=k, replace=False))
    return [(s * burst_s, (s + 1) * burst_s) for s in slots]


def _in_intervals(times: np.ndarray, intervals: list[tuple[float, float]]) -> np.ndarray:
    mask = np.zeros(times.shape, dtype=bool)
    for a, b in intervals:
        mask |= (times >= a) & (times < b)
    return mask


def synth_session(hr_bpm, config: SynthConfig = SynthConfig()) -> RawSession:
    """Render a labelled recording whose pulse follows the given HR series."""
    hr = np.asarray(hr_bpm, dtype=np.float64)
    if hr.ndim != 1 or hr.size < 2:
        raise ParameterError("need a 1-D HR series with at least two points")
    if np.any(hr <= 0):
        raise ParameterError("heart rates must be positive")
    label_times = np.arange(hr.size) * config.label_dt_s
    duration = float(label_times[-1])
    rng = np.random.default_rng(config.seed)
    bursts = _burst_intervals(duration, config.artifact_fraction,
                              config.artifact_burst_s, rng)

    def render(rate: float, n_samples_noise_std: float, n_channels: int,
               with_pulse: bool, with_artifact: bool) -> np.ndarray:
        n = int(round(duration * rate))
        t = np.arange(n) / rate
        base = np.zeros(n)
        if with_pulse:
            f_hr = np.interp(t, label_times, hr) / 60.0
            phi = _phase(f_hr, rate)
            for h, amp in enumerate(config.harmonics, start=1):
                base += amp * np.sin(h * phi)
        if with_artifact and bursts:
            f_art = (np.interp(t, label_times, hr) + config.artifact_offset_bpm) / 60.0
            phi_art = _phase(f_art, rate)
            base += config.artifact_amplitude * np.sin(phi_art) * _in_intervals(t, bursts)
        out = np.empty((n_channels, n))
        for ch in range(n_channels):
            out[ch] = base + rng.normal(0.0, n_samples_noise_std, n)
        return out

    ppg = render(config.ppg_rate_hz, config.noise_std, config.n_ppg,
                 with_pulse=True, with_artifact=True)
    acc = None
    acc_names: tuple[str, ...] = ()
    if config.n_acc > 0:
        acc = render(config.acc_rate_hz, config.acc_noise_std, config.n_acc,
                     with_pulse=False, with_artifact=config.artifact_in_accel)
        acc_names = tuple(f"acc_{i}" for i in range(config.n_acc))

    tags = None
    if config.tag_labels:
        in_burst = _in_intervals(label_times, bursts)
        tags = tuple("artifact" if b else "clean" for b in in_burst)

    return RawSession(
        ppg=ppg,
        ppg_rate_hz=config.ppg_rate_hz,
        acc=acc,
        acc_rate_hz=config.acc_rate_hz if acc is not None else None,
        label_times=label_times,
        label_bpm=hr,
        label_tags=tags,
        ppg_names=tuple(f"ppg_{i}" for i in range(config.n_ppg)),
        acc_names=acc_names,
        name=f"synth-{config.seed}",
    )
