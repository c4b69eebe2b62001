"""Session directory round trips and malformed-input handling."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hrtrack import SynthConfig, load_session, save_session, synth_hr_walk, synth_session
from hrtrack.errors import ConfigError, FormatError, ValidationError
from hrtrack.frontend import RawSession
from hrtrack.sessionio import LABELS_NAME, META_NAME, PPG_NAME


def small_session(with_acc=True, with_tags=True):
    hr = synth_hr_walk(0.0, 0.02, 16, seed=6)
    cfg = SynthConfig(seed=6, artifact_fraction=0.4 if with_tags else 0.0)
    s = synth_session(hr, cfg)
    if not with_acc:
        s = RawSession(
            ppg=s.ppg, ppg_rate_hz=s.ppg_rate_hz,
            label_times=s.label_times, label_bpm=s.label_bpm,
            label_tags=s.label_tags if with_tags else None,
            name=s.name,
        )
    return s


class TestRoundTrip:
    def test_full_session(self, tmp_path):
        s = small_session()
        d = tmp_path / "sess"
        save_session(s, d)
        back = load_session(d)
        assert np.array_equal(back.ppg, s.ppg)
        assert np.array_equal(back.acc, s.acc)
        assert back.ppg_rate_hz == s.ppg_rate_hz
        assert back.acc_rate_hz == s.acc_rate_hz
        assert np.array_equal(back.label_times, s.label_times)
        assert np.array_equal(back.label_bpm, s.label_bpm)
        assert back.label_tags == s.label_tags
        assert back.name == "sess"

    def test_ppg_only_session(self, tmp_path):
        s = small_session(with_acc=False, with_tags=False)
        d = tmp_path / "bare"
        save_session(s, d)
        back = load_session(d)
        assert back.acc is None
        assert back.acc_rate_hz is None
        assert back.label_tags is None
        assert np.array_equal(back.ppg, s.ppg)

    def test_channel_names_survive(self, tmp_path):
        s = small_session()
        d = tmp_path / "named"
        save_session(s, d)
        back = load_session(d)
        assert back.ppg_names == ("ppg_0", "ppg_1")
        assert back.acc_names == ("acc_0", "acc_1", "acc_2")


class TestLoadErrors:
    def write_minimal(self, d):
        d.mkdir()
        (d / META_NAME).write_text("ppg_rate_hz=64.0\nppg_channels=ppg_0\n")
        lines = ["time_s,ppg_0"] + [f"{i / 64.0},{0.1 * i}" for i in range(128)]
        (d / PPG_NAME).write_text("\n".join(lines) + "\n")
        (d / LABELS_NAME).write_text("time_s,hr_bpm\n0.0,80.0\n1.0,81.0\n2.0,82.0\n")

    def test_minimal_session_loads(self, tmp_path):
        d = tmp_path / "ok"
        self.write_minimal(d)
        s = load_session(d)
        assert s.ppg.shape == (1, 128)
        assert s.acc is None
        assert s.label_bpm.shape == (3,)

    def test_not_a_directory(self, tmp_path):
        with pytest.raises(FormatError):
            load_session(tmp_path / "missing")

    def test_missing_rate_key(self, tmp_path):
        d = tmp_path / "bad"
        self.write_minimal(d)
        (d / META_NAME).write_text("ppg_channels=ppg_0\n")
        with pytest.raises(ConfigError, match="ppg_rate_hz"):
            load_session(d)

    def test_unparsable_rate(self, tmp_path):
        d = tmp_path / "bad"
        self.write_minimal(d)
        (d / META_NAME).write_text("ppg_rate_hz=fast\n")
        with pytest.raises(ConfigError):
            load_session(d)

    def test_ragged_signal_rows(self, tmp_path):
        d = tmp_path / "bad"
        self.write_minimal(d)
        (d / PPG_NAME).write_text("time_s,ppg_0\n0.0,1.0\n0.015625\n")
        with pytest.raises(FormatError, match="line 3"):
            load_session(d)

    def test_non_numeric_signal(self, tmp_path):
        d = tmp_path / "bad"
        self.write_minimal(d)
        (d / PPG_NAME).write_text("time_s,ppg_0\n0.0,huh\n")
        with pytest.raises(FormatError):
            load_session(d)

    def test_non_monotone_labels(self, tmp_path):
        d = tmp_path / "bad"
        self.write_minimal(d)
        (d / LABELS_NAME).write_text("time_s,hr_bpm\n0.0,80.0\n2.0,81.0\n2.0,82.0\n")
        with pytest.raises(ValidationError):
            load_session(d)

    def test_missing_labels_file(self, tmp_path):
        d = tmp_path / "bad"
        self.write_minimal(d)
        (d / LABELS_NAME).unlink()
        with pytest.raises(FormatError):
            load_session(d)

    def test_empty_signal_file(self, tmp_path):
        d = tmp_path / "bad"
        self.write_minimal(d)
        (d / PPG_NAME).write_text("time_s,ppg_0\n")
        with pytest.raises(FormatError):
            load_session(d)
