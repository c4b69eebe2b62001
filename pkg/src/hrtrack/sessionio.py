"""On-disk session directory format.

A session is a directory holding:

* ``meta.txt``       key=value lines: ppg_rate_hz, acc_rate_hz and the
                     channel name lists (comma separated);
* ``signals_ppg.csv`` column 1 = time in seconds, then one column per channel;
* ``signals_acc.csv`` same layout, optional;
* ``labels.csv``     time_s, hr_bpm and an optional activity tag column.

All CSVs carry exactly one header row and '.' decimal separators.
"""

from __future__ import annotations

import csv
import os
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError
from .frontend import RawSession

META_NAME = "meta.txt"
PPG_NAME = "signals_ppg.csv"
ACC_NAME = "signals_acc.csv"
LABELS_NAME = "labels.csv"


def _atomic_lines(path: Path, lines) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="ascii", newline="") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")
    os.replace(tmp, path)


def _signal_lines(times: np.ndarray, channels: np.ndarray, names) -> list[str]:
    lines = ["time_s," + ",".join(names)]
    for i in range(times.size):
        lines.append(",".join([repr(float(times[i]))] + [repr(float(ch[i])) for ch in channels]))
    return lines


def save_session(session: RawSession, dirpath) -> None:
    """Write a session directory (each file written atomically)."""
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    ppg_names = session.ppg_names or tuple(f"ppg_{i}" for i in range(session.ppg.shape[0]))
    meta = [f"ppg_rate_hz={float(session.ppg_rate_hz)!r}", "ppg_channels=" + ",".join(ppg_names)]
    t_ppg = np.arange(session.ppg.shape[1]) / session.ppg_rate_hz
    _atomic_lines(d / PPG_NAME, _signal_lines(t_ppg, session.ppg, ppg_names))
    if session.acc is not None:
        acc_names = session.acc_names or tuple(f"acc_{i}" for i in range(session.acc.shape[0]))
        meta += [f"acc_rate_hz={float(session.acc_rate_hz)!r}", "acc_channels=" + ",".join(acc_names)]
        t_acc = np.arange(session.acc.shape[1]) / session.acc_rate_hz
        _atomic_lines(d / ACC_NAME, _signal_lines(t_acc, session.acc, acc_names))
    _atomic_lines(d / META_NAME, meta)

    has_tags = session.label_tags is not None
    header = "time_s,hr_bpm,tag" if has_tags else "time_s,hr_bpm"
    rows = [header]
    for i in range(session.label_times.size):
        cells = [repr(float(session.label_times[i])), repr(float(session.label_bpm[i]))]
        if has_tags:
            cells.append(session.label_tags[i])
        rows.append(",".join(cells))
    _atomic_lines(d / LABELS_NAME, rows)


def _read_meta(path: Path) -> dict[str, str]:
    if not path.exists():
        raise FormatError(f"missing {path}")
    meta: dict[str, str] = {}
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"{path} line {lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            meta[key.strip()] = value.strip()
    return meta


def _read_signal_csv(path: Path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Returns (channel names, times, channels[ch, sample])."""
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file")
        if len(header) < 2:
            raise FormatError(f"{path}: need a time column plus at least one channel")
        n_cols = len(header)
        times, data = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n_cols:
                raise FormatError(
                    f"{path} line {lineno}: expected {n_cols} columns, got {len(row)}"
                )
            try:
                values = [float(v) for v in row]
            except ValueError:
                raise FormatError(f"{path} line {lineno}: non-numeric value")
            times.append(values[0])
            data.append(values[1:])
    if not data:
        raise FormatError(f"{path}: no samples")
    return header[1:], np.asarray(times), np.asarray(data).T


def _read_labels(path: Path):
    if not path.exists():
        raise FormatError(f"missing {path}")
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise FormatError(f"{path}: expected header time_s,hr_bpm[,tag]")
        has_tags = len(header) >= 3
        times, bpm, tags = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(
                    f"{path} line {lineno}: expected {len(header)} columns, got {len(row)}"
                )
            try:
                times.append(float(row[0]))
                bpm.append(float(row[1]))
            except ValueError:
                raise FormatError(f"{path} line {lineno}: non-numeric value")
            if has_tags:
                tags.append(row[2])
    if not times:
        raise FormatError(f"{path}: no labels")
    return np.asarray(times), np.asarray(bpm), tuple(tags) if has_tags else None


def load_session(dirpath) -> RawSession:
    """Read a session directory back into a RawSession."""
    d = Path(dirpath)
    if not d.is_dir():
        raise FormatError(f"{d} is not a session directory")
    meta = _read_meta(d / META_NAME)
    if "ppg_rate_hz" not in meta:
        raise ConfigError(f"{d / META_NAME}: missing required key 'ppg_rate_hz'")
    try:
        ppg_rate = float(meta["ppg_rate_hz"])
    except ValueError:
        raise ConfigError(f"{d / META_NAME}: cannot parse ppg_rate_hz={meta['ppg_rate_hz']!r}")
    ppg_names, _, ppg = _read_signal_csv(d / PPG_NAME)

    acc = None
    acc_rate = None
    acc_names: tuple[str, ...] = ()
    acc_path = d / ACC_NAME
    if acc_path.exists():
        if "acc_rate_hz" not in meta:
            raise ConfigError(f"{d / META_NAME}: missing required key 'acc_rate_hz'")
        try:
            acc_rate = float(meta["acc_rate_hz"])
        except ValueError:
            raise ConfigError(f"{d / META_NAME}: cannot parse acc_rate_hz={meta['acc_rate_hz']!r}")
        names, _, acc = _read_signal_csv(acc_path)
        acc_names = tuple(names)

    times, bpm, tags = _read_labels(d / LABELS_NAME)
    return RawSession(
        ppg=ppg,
        ppg_rate_hz=ppg_rate,
        acc=acc,
        acc_rate_hz=acc_rate,
        label_times=times,
        label_bpm=bpm,
        label_tags=tags,
        ppg_names=tuple(ppg_names),
        acc_names=acc_names,
        name=d.name,
    )
