"""Command-line front door.

Commands cover the whole loop: generate a synthetic session, fit and
discretize the transition model, compute per-window emissions, run the
online filter or the offline decoder, and score predictions (MAE/NLL/MAPE,
calibration curve, rejection sweep).

Configuration comes from built-in defaults, overridden by an optional
key=value --config file, overridden by explicit flags.  Exit codes:
0 success, 2 configuration error, 3 data/format error, 4 numeric failure.
All outputs are written to a temporary file first and renamed on success.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .emission import (
    DEFAULT_ACCEL_WEIGHT,
    DEFAULT_BETA,
    DEFAULT_FLOOR,
    SpectralEmission,
    emissions_from_windows,
    iter_emission_rows,
    load_emissions,
    read_emission_header,
    save_emissions,
)
from .errors import ConfigError, FormatError, HrTrackError, ParameterError
from .evaluation import (
    PredictionRecord,
    calibration_curve,
    grouped_mape,
    mae_by_session,
    nll,
    rejection_sweep,
)
from .frontend import (
    BAND_HI_HZ,
    BAND_LO_HZ,
    BAND_ORDER,
    SUB_WIN_S,
    WIN_LEN_S,
    WIN_SHIFT_S,
    make_windows,
)
from .grid import (
    DEFAULT_BIN_COUNT,
    DEFAULT_SIGMA_Y,
    DEFAULT_Y_MAX,
    DEFAULT_Y_MIN,
    BinDistribution,
    HrGrid,
    dist_stats,
)
from .inference import filter_stream, viterbi
from .sessionio import load_session, save_session
from .synthetic import SynthConfig, synth_hr_walk, synth_session
from .transition import discretize_transition, fit_transition, load_transition, save_transition


@dataclass
class RunConfig:
    """Everything tunable from the command line or a config file."""

    grid_bins: int = DEFAULT_BIN_COUNT
    grid_min: float = DEFAULT_Y_MIN
    grid_max: float = DEFAULT_Y_MAX
    sigma_y: float = DEFAULT_SIGMA_Y
    band_lo: float = BAND_LO_HZ
    band_hi: float = BAND_HI_HZ
    filter_order: int = BAND_ORDER
    win_len: float = WIN_LEN_S
    win_shift: float = WIN_SHIFT_S
    beta: float = DEFAULT_BETA
    accel_suppression: float = DEFAULT_ACCEL_WEIGHT
    emission_floor: float = DEFAULT_FLOOR
    seed: int = 0

    def validate(self) -> None:
        if self.grid_bins < 2:
            raise ConfigError(f"grid_bins must be >= 2, got {self.grid_bins}")
        if not self.grid_min < self.grid_max:
            raise ConfigError(f"need grid_min < grid_max, got {self.grid_min}, {self.grid_max}")
        if self.sigma_y <= 0:
            raise ConfigError(f"sigma_y must be positive, got {self.sigma_y}")
        if not 0 < self.band_lo < self.band_hi:
            raise ConfigError(f"need 0 < band_lo < band_hi, got {self.band_lo}, {self.band_hi}")
        if self.filter_order < 1:
            raise ConfigError(f"filter_order must be >= 1, got {self.filter_order}")
        if self.win_len < SUB_WIN_S:
            raise ConfigError(f"win_len must be >= {SUB_WIN_S} s, got {self.win_len}")
        if self.win_shift <= 0:
            raise ConfigError(f"win_shift must be positive, got {self.win_shift}")
        if self.beta <= 0:
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if self.accel_suppression < 0:
            raise ConfigError(f"accel_suppression must be >= 0, got {self.accel_suppression}")
        if self.emission_floor <= 0:
            raise ConfigError(f"emission_floor must be positive, got {self.emission_floor}")

    def grid(self) -> HrGrid:
        return HrGrid(self.grid_bins, self.grid_min, self.grid_max)


_CONFIG_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        fh = open(path, "r", encoding="ascii")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path} line {lineno}: expected key=value, got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in _CONFIG_TYPES:
                raise ConfigError(f"{path} line {lineno}: unknown config key {key!r}")
            caster = int if _CONFIG_TYPES[key] in ("int", int) else float
            try:
                values[key] = caster(value)
            except ValueError:
                raise ConfigError(f"{path} line {lineno}: cannot parse {key}={value!r}")
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        for key, value in _read_config_file(args.config).items():
            setattr(cfg, key, value)
    for f in fields(RunConfig):
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            setattr(cfg, f.name, flag_value)
    cfg.validate()
    return cfg


@contextlib.contextmanager
def _atomic_output(path):
    """Yield a temp path; rename onto `path` on success, discard on failure."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        yield tmp
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise
    os.replace(tmp, path)


def _fmt(v: float) -> str:
    return repr(float(v))


# ---------------------------------------------------------------- commands


def _cmd_synth(args, cfg: RunConfig) -> int:
    label_dt = cfg.win_shift
    steps = int(round(args.duration / label_dt)) + 1
    hr = synth_hr_walk(args.walk_mu, args.walk_sigma, steps, seed=cfg.seed,
                       y_lo=cfg.grid_min + 2.0, y_hi=cfg.grid_max - 2.0)
    synth_cfg = SynthConfig(
        ppg_rate_hz=args.ppg_rate,
        acc_rate_hz=args.acc_rate,
        n_ppg=args.ppg_channels,
        n_acc=args.acc_channels,
        label_dt_s=label_dt,
        noise_std=args.noise_std,
        acc_noise_std=args.acc_noise_std,
        artifact_fraction=args.artifact_fraction,
        artifact_offset_bpm=args.artifact_offset,
        artifact_amplitude=args.artifact_amplitude,
        artifact_in_accel=args.artifact_in_accel,
        seed=cfg.seed,
    )
    session = synth_session(hr, synth_cfg)
    save_session(session, args.out)
    print(f"wrote session {args.out}: {args.duration:.0f} s, "
          f"HR {hr.min():.1f}-{hr.max():.1f} BPM, {len(hr)} labels")
    return 0


def _cmd_fit_transition(args, cfg: RunConfig) -> int:
    sequences = []
    for d in args.sessions:
        sequences.append(load_session(d).label_bpm)
    mu, sigma = fit_transition(sequences)
    model = discretize_transition(mu, sigma, cfg.grid())
    with _atomic_output(args.out) as tmp:
        save_transition(model, tmp)
    print(f"fitted mu={mu:.6g} sigma={sigma:.6g} over {len(sequences)} session(s); "
          f"wrote {args.out}")
    return 0


def _windows_and_source(args, cfg: RunConfig):
    session = load_session(args.session)
    windows = make_windows(session, win_len=cfg.win_len, shift=cfg.win_shift,
                           f_lo=cfg.band_lo, f_hi=cfg.band_hi, order=cfg.filter_order)
    source = SpectralEmission(cfg.grid(), beta=cfg.beta,
                              accel_weight=cfg.accel_suppression, floor=cfg.emission_floor)
    return session, windows, source


def _cmd_emit(args, cfg: RunConfig) -> int:
    _, windows, source = _windows_and_source(args, cfg)
    series = emissions_from_windows(windows, source, dt=cfg.win_shift)
    with _atomic_output(args.out) as tmp:
        save_emissions(series, tmp)
    print(f"wrote {len(series)} emission rows to {args.out}")
    return 0


def _emission_stream(args, cfg: RunConfig):
    """(t0, dt, generator of BinDistribution) from a file or the baseline model."""
    grid = cfg.grid()
    if args.emissions:
        header = read_emission_header(args.emissions)
        rows = iter_emission_rows(args.emissions, grid)
        return header["t0"], header["dt"], (BinDistribution(grid, r) for r in rows)
    _, windows, source = _windows_and_source(args, cfg)
    t0 = windows[0].center_time
    return t0, cfg.win_shift, (source.emit(w) for w in windows)


def _cmd_infer(args, cfg: RunConfig) -> int:
    grid = cfg.grid()
    model = load_transition(args.transition, grid)
    t0, dt, emission_gen = _emission_stream(args, cfg)
    header = ["time_s", "hr_mean_bpm", "hr_mode_bpm", "entropy_nats", "std_bpm"]
    if args.dump_posterior:
        header += [f"p_{i:03d}" for i in range(grid.bin_count)]
    n = 0
    with _atomic_output(args.out) as tmp:
        with open(tmp, "w", encoding="ascii", newline="") as fh:
            fh.write(",".join(header) + "\n")
            stream = filter_stream(emission_gen, model,
                                   reset_on_collapse=args.reset_on_collapse)
            for k, (posterior, _z) in enumerate(stream):
                stats = dist_stats(posterior)
                mode = grid.centers[posterior.mode_index()]
                cells = [_fmt(t0 + k * dt), _fmt(stats.mean), _fmt(mode),
                         _fmt(stats.entropy), _fmt(stats.std)]
                if args.dump_posterior:
                    cells += [_fmt(p) for p in posterior.probs]
                fh.write(",".join(cells) + "\n")
                n += 1
    print(f"wrote {n} filtered predictions to {args.out}")
    return 0


def _cmd_decode(args, cfg: RunConfig) -> int:
    grid = cfg.grid()
    model = load_transition(args.transition, grid)
    if args.emissions:
        series = load_emissions(args.emissions, grid)
        t0, dt = series.t0, series.dt
        _, bpm = viterbi(series, model)
    else:
        _, windows, source = _windows_and_source(args, cfg)
        series = emissions_from_windows(windows, source, dt=cfg.win_shift)
        t0, dt = series.t0, series.dt
        _, bpm = viterbi(series, model)
    with _atomic_output(args.out) as tmp:
        with open(tmp, "w", encoding="ascii", newline="") as fh:
            fh.write("time_s,hr_bpm\n")
            for k, v in enumerate(bpm):
                fh.write(f"{_fmt(t0 + k * dt)},{_fmt(v)}\n")
    print(f"wrote {len(bpm)} decoded predictions to {args.out}")
    return 0


# ------------------------------------------------------------- evaluation


def _read_predictions(path) -> dict:
    """Parse a predictions CSV into arrays; posterior columns are optional."""
    try:
        fh = open(path, "r", encoding="ascii", newline="")
    except OSError as e:
        raise FormatError(f"cannot read predictions file {path}: {e}")
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise FormatError(f"{path}: empty predictions file")
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
        raise FormatError(f"{path}: no prediction rows")
    data = np.asarray(rows)
    cols = {name: data[:, i] for i, name in enumerate(header)}
    if "time_s" not in cols:
        raise FormatError(f"{path}: missing time_s column")
    p_names = [name for name in header if name.startswith("p_") and name[2:].isdigit()]
    posteriors = None
    if p_names:
        p_names.sort(key=lambda s: int(s[2:]))
        posteriors = np.stack([cols[name] for name in p_names], axis=1)
    return {"columns": cols, "posteriors": posteriors}


def _session_records(pred_path, session_dir, grid):
    session = load_session(session_dir)
    parsed = _read_predictions(pred_path)
    cols = parsed["columns"]
    times = cols["time_s"]
    predicted = cols.get("hr_mean_bpm")
    if predicted is None:
        predicted = cols.get("hr_bpm")
    if predicted is None:
        raise FormatError(f"{pred_path}: need an hr_mean_bpm or hr_bpm column")
    truths = session.truth_at(times)
    entropies = cols.get("entropy_nats")
    stds = cols.get("std_bpm")
    records = []
    for i, t in enumerate(times):
        records.append(PredictionRecord(
            session_id=session.name,
            time_s=float(t),
            predicted_bpm=float(predicted[i]),
            truth_bpm=float(truths[i]),
            entropy=float(entropies[i]) if entropies is not None else None,
            std=float(stds[i]) if stds is not None else None,
            tag=session.tag_at(float(t)),
        ))
    posteriors = parsed["posteriors"]
    if posteriors is not None:
        if posteriors.shape[1] != grid.bin_count:
            raise FormatError(
                f"{pred_path}: {posteriors.shape[1]} posterior columns do not match "
                f"the {grid.bin_count}-bin grid"
            )
        sums = posteriors.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-6) or np.any(posteriors < 0.0):
            raise FormatError(f"{pred_path}: posterior rows are not distributions")
        posteriors = posteriors / sums[:, None]
    return records, truths, posteriors


def _paired_records(args, cfg: RunConfig):
    if len(args.pred) != len(args.session):
        raise ConfigError(
            f"got {len(args.pred)} --pred but {len(args.session)} --session arguments"
        )
    grid = cfg.grid()
    records, truths, posteriors = [], [], []
    for pred_path, session_dir in zip(args.pred, args.session):
        recs, tr, post = _session_records(pred_path, session_dir, grid)
        records.extend(recs)
        truths.append(tr)
        posteriors.append(post)
    truths = np.concatenate(truths)
    if any(p is None for p in posteriors):
        pooled = None
    else:
        pooled = np.vstack(posteriors)
    return records, truths, pooled, grid


def _write_rows(out_path, header: str, lines) -> None:
    if out_path:
        with _atomic_output(out_path) as tmp:
            with open(tmp, "w", encoding="ascii", newline="") as fh:
                fh.write(header + "\n")
                for line in lines:
                    fh.write(line + "\n")
    else:
        print(header)
        for line in lines:
            print(line)


def _cmd_eval(args, cfg: RunConfig) -> int:
    records, truths, posteriors, grid = _paired_records(args, cfg)
    per_session, mean, std = mae_by_session(records)
    lines = [f"mae_mean,{_fmt(mean)}", f"mae_std,{_fmt(std)}"]
    for sid, value in per_session.items():
        lines.append(f"mae/{sid},{_fmt(value)}")
    if posteriors is not None:
        dists = [BinDistribution(grid, p) for p in posteriors]
        lines.append(f"nll,{_fmt(nll(dists, truths))}")
    if all(r.tag is not None for r in records):
        for tag, value in grouped_mape(records).items():
            lines.append(f"mape/{tag},{_fmt(value)}")
    _write_rows(args.out, "metric,value", lines)
    return 0


def _cmd_calibrate(args, cfg: RunConfig) -> int:
    records, truths, posteriors, grid = _paired_records(args, cfg)
    if posteriors is None:
        raise FormatError(
            "calibration needs posterior columns; rerun infer with --dump-posterior"
        )
    dists = [BinDistribution(grid, p) for p in posteriors]
    curve = calibration_curve(dists, truths)
    _write_rows(args.out, "confidence,coverage",
                [f"{_fmt(q)},{_fmt(cov)}" for q, cov in curve])
    return 0


def _cmd_reject_sweep(args, cfg: RunConfig) -> int:
    records, _, _, _ = _paired_records(args, cfg)
    try:
        fractions = [float(v) for v in args.fractions.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse --fractions {args.fractions!r}")
    if not fractions:
        raise ConfigError("--fractions is empty")
    sweep = rejection_sweep(records, fractions, uncertainty=args.metric)
    _write_rows(args.out, "fraction,mae",
                [f"{_fmt(f)},{_fmt(mae)}" for f, mae in sweep])
    return 0


# ------------------------------------------------------------------ parser


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--grid-bins", dest="grid_bins", type=int)
    common.add_argument("--grid-min", dest="grid_min", type=float)
    common.add_argument("--grid-max", dest="grid_max", type=float)
    common.add_argument("--sigma-y", dest="sigma_y", type=float)
    common.add_argument("--band-lo", dest="band_lo", type=float)
    common.add_argument("--band-hi", dest="band_hi", type=float)
    common.add_argument("--filter-order", dest="filter_order", type=int)
    common.add_argument("--win-len", dest="win_len", type=float)
    common.add_argument("--win-shift", dest="win_shift", type=float)
    common.add_argument("--beta", dest="beta", type=float)
    common.add_argument("--accel-suppression", dest="accel_suppression", type=float)
    common.add_argument("--emission-floor", dest="emission_floor", type=float)
    common.add_argument("--seed", dest="seed", type=int)

    parser = argparse.ArgumentParser(
        prog="hrtrack",
        description="Heart-rate tracking from PPG with a discrete-state Markov filter.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic session")
    p.add_argument("--out", required=True, help="session directory to create")
    p.add_argument("--duration", type=float, default=600.0, help="seconds (default 600)")
    p.add_argument("--walk-mu", type=float, default=0.0)
    p.add_argument("--walk-sigma", type=float, default=0.02)
    p.add_argument("--noise-std", type=float, default=0.1)
    p.add_argument("--acc-noise-std", type=float, default=0.5)
    p.add_argument("--artifact-fraction", type=float, default=0.0)
    p.add_argument("--artifact-offset", type=float, default=30.0)
    p.add_argument("--artifact-amplitude", type=float, default=2.0)
    p.add_argument("--artifact-in-accel", action="store_true")
    p.add_argument("--ppg-rate", type=float, default=64.0)
    p.add_argument("--acc-rate", type=float, default=32.0)
    p.add_argument("--ppg-channels", type=int, default=2)
    p.add_argument("--acc-channels", type=int, default=3)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("fit-transition", parents=[common],
                       help="fit the log-ratio Gaussian on session labels")
    p.add_argument("sessions", nargs="+", help="session directories")
    p.add_argument("--out", required=True, help="transition artifact path")
    p.set_defaults(func=_cmd_fit_transition)

    p = sub.add_parser("emit", parents=[common],
                       help="compute baseline spectral emissions for a session")
    p.add_argument("session", help="session directory")
    p.add_argument("--out", required=True, help="emission file path")
    p.set_defaults(func=_cmd_emit)

    p = sub.add_parser("infer", parents=[common], help="online filtering")
    p.add_argument("session", help="session directory")
    p.add_argument("--transition", required=True, help="transition artifact")
    p.add_argument("--emissions", help="emission file (default: spectral baseline)")
    p.add_argument("--out", required=True, help="predictions CSV path")
    p.add_argument("--reset-on-collapse", action="store_true",
                   help="restart from a uniform belief instead of failing")
    p.add_argument("--dump-posterior", action="store_true",
                   help="append one column per HR bin")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("decode", parents=[common], help="offline most-probable path")
    p.add_argument("session", help="session directory")
    p.add_argument("--transition", required=True, help="transition artifact")
    p.add_argument("--emissions", help="emission file (default: spectral baseline)")
    p.add_argument("--out", required=True, help="predictions CSV path")
    p.set_defaults(func=_cmd_decode)

    def eval_like(name, help_text):
        q = sub.add_parser(name, parents=[common], help=help_text)
        q.add_argument("--pred", action="append", required=True,
                       help="predictions CSV (repeatable)")
        q.add_argument("--session", action="append", required=True,
                       help="session directory matching the --pred at the same position")
        q.add_argument("--out", help="output CSV (default: stdout)")
        return q

    p = eval_like("eval", "MAE / NLL / grouped MAPE report")
    p.set_defaults(func=_cmd_eval)

    p = eval_like("calibrate", "coverage of highest-density credible regions")
    p.set_defaults(func=_cmd_calibrate)

    p = eval_like("reject-sweep", "MAE vs retained fraction, most-confident first")
    p.add_argument("--metric", choices=("entropy", "std"), default="entropy")
    p.add_argument("--fractions",
                   default="0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95,1.0")
    p.set_defaults(func=_cmd_reject_sweep)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        return args.func(args, cfg)
    except HrTrackError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
