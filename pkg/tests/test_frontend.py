"""DSP front end: band-pass, normalization, resampling, windowing."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hrtrack.errors import InsufficientDataError, ParameterError, ValidationError
from hrtrack.frontend import (
    FFT_LEN,
    RawSession,
    SPEC_RATE_HZ,
    SPEC_BIN_LO,
    TIME_SAMPLES,
    bandpass,
    bandpass_response,
    make_windows,
    resample,
    window_count,
    zscore,
)


def steady_amplitude(y, fs, tail_s):
    """Amplitude of a steady-state sinusoid from the rms of the tail."""
    tail = y[-int(tail_s * fs):]
    return np.sqrt(2.0) * np.sqrt(np.mean(tail**2))


def spectral_index(f_hz):
    """Spectrogram bin index a pure tone at f_hz lands in."""
    return round(f_hz * FFT_LEN / SPEC_RATE_HZ) - SPEC_BIN_LO


class TestBandpass:
    def test_dc_is_blocked(self):
        # the designed response is exactly zero at DC; the causal step
        # transient of the 0.1 Hz corner takes tens of seconds to die out
        assert bandpass_response(32.0, [0.0], 0.1, 14.0)[0] <= 1e-9
        x = np.ones(int(40 * 32))
        y = bandpass(x, 32.0, 0.1, 14.0)
        assert np.abs(y[int(30 * 32):]).max() < 1e-3

    def test_passband_amplitude_matches_response(self):
        fs = 32.0
        t = np.arange(int(30 * fs)) / fs
        y = bandpass(np.sin(2 * np.pi * 1.0 * t), fs, 0.1, 14.0)
        expected = bandpass_response(fs, [1.0], 0.1, 14.0)[0]
        measured = steady_amplitude(y, fs, 10.0)
        assert abs(measured - expected) / expected <= 0.05

    def test_stopband_attenuation_matches_response(self):
        fs = 32.0
        t = np.arange(int(30 * fs)) / fs
        y = bandpass(np.sin(2 * np.pi * 15.9 * t), fs, 0.1, 14.0)
        expected = bandpass_response(fs, [15.9], 0.1, 14.0)[0]
        measured = steady_amplitude(y, fs, 10.0)
        assert expected < 1e-3  # deep in the stopband
        assert abs(measured - expected) / expected <= 0.05

    def test_causal(self):
        x = np.zeros(256)
        x[100] = 1.0
        y = bandpass(x, 64.0, 0.1, 18.0)
        assert np.all(y[:100] == 0.0)
        assert y.shape == x.shape

    def test_nyquist_validation(self):
        with pytest.raises(ParameterError):
            bandpass(np.zeros(64), 32.0, 0.1, 18.0)  # 18 >= 16
        with pytest.raises(ParameterError):
            bandpass(np.zeros(64), 64.0, 0.0, 18.0)
        with pytest.raises(ParameterError):
            bandpass(np.zeros(64), 64.0, 5.0, 1.0)


class TestZscore:
    def test_example(self):
        assert_allclose(zscore(np.array([1.0, 2.0, 3.0])), [-1.2247, 0.0, 1.2247], atol=1e-4)

    def test_constant_maps_to_zeros(self):
        assert_allclose(zscore(np.full(10, 5.0)), 0.0)

    def test_moments(self):
        rng = np.random.default_rng(0)
        z = zscore(rng.normal(3.0, 7.0, 4096))
        assert abs(z.mean()) <= 1e-9
        assert abs(z.std() - 1.0) <= 1e-9


class TestResample:
    def test_length(self):
        assert resample(np.zeros(640), 32.0, 64.0).shape == (1280,)
        assert resample(np.zeros(200), 25.0, 25.0).shape == (200,)

    def test_constant_preserved(self):
        out = resample(np.full(100, 2.5), 32.0, 64.0)
        assert_allclose(out, 2.5, atol=1e-12)

    def test_identity_at_same_rate(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=321)
        assert_allclose(resample(x, 32.0, 32.0), x, atol=1e-12)

    def test_tone_keeps_its_frequency(self):
        fs_in, fs_out, dur = 32.0, 64.0, 20.0
        t = np.arange(int(dur * fs_in)) / fs_in
        x = np.sin(2 * np.pi * 2.0 * t)
        y = resample(x, fs_in, fs_out)
        # 2 Hz over 20 s is FFT bin 40 at either rate
        assert np.abs(np.fft.rfft(x)).argmax() == 40
        assert np.abs(np.fft.rfft(y)).argmax() == 40


class TestRawSession:
    def make(self, **kw):
        n = int(60 * 64)
        defaults = dict(
            ppg=np.zeros((2, n)),
            ppg_rate_hz=64.0,
            label_times=np.array([0.0, 2.0, 4.0]),
            label_bpm=np.array([80.0, 82.0, 84.0]),
        )
        defaults.update(kw)
        return RawSession(**defaults)

    def test_duration_is_shortest_stream(self):
        s = self.make(acc=np.zeros((3, int(50 * 32))), acc_rate_hz=32.0)
        assert s.duration_s == 50.0

    def test_truth_interpolates(self):
        s = self.make()
        assert s.truth_at(np.array([1.0]))[0] == 81.0
        assert s.truth_at(np.array([4.0]))[0] == 84.0

    def test_tag_takes_nearest_label(self):
        s = self.make(label_tags=("clean", "artifact", "clean"))
        assert s.tag_at(1.2) == "artifact"
        assert s.tag_at(0.2) == "clean"

    def test_non_monotone_labels_rejected(self):
        with pytest.raises(ValidationError):
            self.make(label_times=np.array([0.0, 2.0, 2.0]))

    def test_label_count_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            self.make(label_bpm=np.array([80.0, 82.0]))


class TestMakeWindows:
    def tone_session(self, f_ppg, dur=60.0, f_acc=None):
        t = np.arange(int(dur * 64)) / 64.0
        ppg = np.stack([np.sin(2 * np.pi * f_ppg * t)] * 2)
        acc = None
        acc_rate = None
        if f_acc is not None:
            ta = np.arange(int(dur * 32)) / 32.0
            acc = np.stack([np.sin(2 * np.pi * f_acc * ta)] * 3)
            acc_rate = 32.0
        labels = np.arange(0.0, dur + 1, 2.0)
        return RawSession(
            ppg=ppg, ppg_rate_hz=64.0, acc=acc, acc_rate_hz=acc_rate,
            label_times=labels, label_bpm=np.full(labels.shape, f_ppg * 60.0),
        )

    def test_window_count(self):
        assert window_count(60.0) == 21
        assert window_count(20.0) == 1
        assert window_count(600.0) == 291

    def test_shapes_and_times(self):
        wins = make_windows(self.tone_session(1.5))
        assert len(wins) == 21
        for k, w in enumerate(wins):
            assert w.time_domain.shape == (TIME_SAMPLES,)
            assert w.spectrogram.shape == (7, 64, 2)
            assert np.all(w.spectrogram >= 0.0)
            assert w.start_time == 2.0 * k
            assert w.center_time == 2.0 * k + 10.0

    def test_pure_tone_peaks_at_expected_bin(self):
        # 1.5 Hz (90 BPM) lands in spectrogram bin 21 in every sub-window
        wins = make_windows(self.tone_session(1.5))
        for w in wins:
            assert np.all(w.spectrogram[:, :, 0].argmax(axis=1) == 21)

    def test_peak_bin_is_stable_across_windows(self):
        wins = make_windows(self.tone_session(1.3, dur=120.0))
        want = spectral_index(1.3)
        peaks = {int(i) for w in wins for i in w.spectrogram[:, :, 0].argmax(axis=1)}
        assert peaks == {want}

    def test_missing_accel_gives_zero_plane(self):
        wins = make_windows(self.tone_session(1.5))
        for w in wins:
            assert np.all(w.spectrogram[:, :, 1] == 0.0)

    def test_accel_plane_sees_accel_tone(self):
        wins = make_windows(self.tone_session(1.5, f_acc=2.0))
        want = spectral_index(2.0)
        for w in wins:
            assert np.all(w.spectrogram[:, :, 1].argmax(axis=1) == want)

    def test_time_branch_is_normalized(self):
        wins = make_windows(self.tone_session(1.5))
        for w in wins:
            assert abs(w.time_domain.mean()) < 0.05
            assert abs(w.time_domain.std() - 1.0) < 0.15

    def test_too_short_session(self):
        with pytest.raises(InsufficientDataError):
            make_windows(self.tone_session(1.5, dur=12.0))

    def test_low_rate_needs_a_valid_band(self):
        sess = self.tone_session(1.5)
        slow = RawSession(
            ppg=sess.ppg[:, ::2], ppg_rate_hz=32.0,
            label_times=sess.label_times, label_bpm=sess.label_bpm,
        )
        with pytest.raises(ParameterError):
            make_windows(slow)  # default 18 Hz corner breaks Nyquist at 32 Hz
        wins = make_windows(slow, f_hi=14.0)
        assert len(wins) == 21
