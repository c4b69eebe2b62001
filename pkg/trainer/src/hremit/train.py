"""Training loop and emission export.

`train_and_export` fits the network on labelled sessions and writes one
emission file per requested session in the shared plain-text format
(header lines bins=, y_min=, y_max=, t0=, dt=, then one probability row
per window), which the tracking side consumes directly.
"""

from __future__ import annotations

import dataclasses
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .augment import MAX_STRETCH, NOISE_STD, augment
from .errors import ConfigError, TrainingError
from .frontend import (
    WIN_SHIFT_S,
    LabeledSession,
    RawWindow,
    cut_windows,
    featurize,
    load_session,
)
from .grid import LabelGrid, gaussian_target
from .model import EmissionNet, soft_cross_entropy

log = logging.getLogger("hremit")


@dataclass(frozen=True)
class TrainConfig:
    """Everything that shapes a training run."""

    sigma_y: float = 1.5            # std (BPM) of the discretized-Gaussian targets
    max_stretch: float = MAX_STRETCH
    noise_std: float = NOISE_STD
    aug_copies: int = 1             # augmented variants added per window
    bins: int = 64
    y_min: float = 30.0
    y_max: float = 210.0
    latent: int = 24
    conv_width: int = 8
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.sigma_y <= 0:
            raise ConfigError(f"sigma_y must be positive, got {self.sigma_y}")
        if not 0.0 <= self.max_stretch <= MAX_STRETCH:
            raise ConfigError(
                f"max_stretch must lie in [0, {MAX_STRETCH}], got {self.max_stretch}"
            )
        if self.noise_std < 0:
            raise ConfigError(f"noise_std must be >= 0, got {self.noise_std}")
        if self.aug_copies < 0:
            raise ConfigError(f"aug_copies must be >= 0, got {self.aug_copies}")
        if self.latent < 1 or self.conv_width < 1:
            raise ConfigError("latent and conv_width must be >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")

    @property
    def grid(self) -> LabelGrid:
        return LabelGrid(self.bins, self.y_min, self.y_max)


def config_from_text(lines, base: TrainConfig = TrainConfig()) -> TrainConfig:
    """Apply key=value overrides (one per line, # comments) to a config."""
    fields = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    updates = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in fields:
            raise ConfigError(f"line {lineno}: unknown configuration key {key!r}")
        try:
            caster = int if fields[key] == "int" else float
            updates[key] = caster(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: cannot parse {key}={value!r}")
    return dataclasses.replace(base, **updates)


def _training_arrays(sessions: Sequence[LabeledSession],
                     config: TrainConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Featurized windows plus targets: (time, spect, target) arrays."""
    grid = config.grid
    rng = np.random.default_rng(config.seed)
    tds, sgs, targets = [], [], []
    skipped = 0

    def push(window: RawWindow):
        td, sg = featurize(window)
        tds.append(td)
        sgs.append(sg)
        targets.append(gaussian_target(grid, window.label_bpm, config.sigma_y).probs)

    for session in sessions:
        for window in cut_windows(session):
            if not grid.contains(window.label_bpm):
                skipped += 1
                log.info("skipping window at t=%.1f s of %s: label %.1f BPM off-grid",
                         window.start_time, session.name, window.label_bpm)
                continue
            push(window)
            for _ in range(config.aug_copies):
                variant = augment(window, grid, rng,
                                  max_stretch=config.max_stretch,
                                  noise_std=config.noise_std)
                if variant is None:
                    skipped += 1
                    continue
                push(variant)
    if not tds:
        raise TrainingError("no usable training windows (all labels off-grid?)")
    if skipped:
        log.info("dropped %d window variants with off-grid labels", skipped)
    return np.stack(tds), np.stack(sgs), np.stack(targets)


def train_model(sessions: Sequence[LabeledSession], config: TrainConfig) -> EmissionNet:
    """Fit the network; deterministic for a fixed config and session list."""
    if not sessions:
        raise TrainingError("need at least one training session")
    td, sg, target = _training_arrays(sessions, config)

    torch.manual_seed(config.seed)
    torch.set_num_threads(1)
    net = EmissionNet(bins=config.bins, latent=config.latent,
                      conv_width=config.conv_width)
    td_t = torch.from_numpy(td).float()
    sg_t = torch.from_numpy(sg).float()
    target_t = torch.from_numpy(target).float()

    opt = torch.optim.Adam(net.parameters(), lr=config.learning_rate)
    shuffler = torch.Generator().manual_seed(config.seed)
    n = td_t.shape[0]
    net.train()
    for epoch in range(config.epochs):
        order = torch.randperm(n, generator=shuffler)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            opt.zero_grad()
            logits = net(td_t[idx], sg_t[idx])
            loss = soft_cross_entropy(logits, target_t[idx])
            value = float(loss.detach())
            if not np.isfinite(value):
                raise TrainingError(f"loss became {value} in epoch {epoch + 1}")
            loss.backward()
            opt.step()
            epoch_loss += value * idx.numel()
        log.debug("epoch %d/%d: mean loss %.4f",
                  epoch + 1, config.epochs, epoch_loss / n)
    net.eval()
    return net


def predict_emissions(net: EmissionNet, session: LabeledSession,
                      config: TrainConfig) -> tuple[float, np.ndarray]:
    """Per-window distributions for one session: (t0 of first center, probs)."""
    windows = cut_windows(session)
    feats = [featurize(w) for w in windows]
    td_t = torch.from_numpy(np.stack([f[0] for f in feats])).float()
    sg_t = torch.from_numpy(np.stack([f[1] for f in feats])).float()
    with torch.no_grad():
        logits = net(td_t, sg_t).double()
        probs = torch.softmax(logits, dim=-1).numpy()
    probs /= probs.sum(axis=1, keepdims=True)
    return windows[0].center_time, probs


def save_emissions(path, grid: LabelGrid, t0: float, dt: float,
                   probs: np.ndarray) -> None:
    """Write one emission file atomically in the shared text format."""
    lines = [
        f"bins={grid.bins}",
        f"y_min={float(grid.y_min)!r}",
        f"y_max={float(grid.y_max)!r}",
        f"t0={float(t0)!r}",
        f"dt={float(dt)!r}",
    ]
    for row in probs:
        lines.append(" ".join(f"{float(v):.9g}" for v in row))
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def train_and_export(train_dirs: Sequence, out_dir, config: TrainConfig = TrainConfig(),
                     eval_dirs: Sequence = ()) -> dict[str, Path]:
    """Train on the given sessions, export emissions for train + eval sessions.

    Returns {session name: written path}.  Evaluation sessions contribute no
    training windows; they only get exported distributions.
    """
    train_sessions = [load_session(d) for d in train_dirs]
    eval_sessions = [load_session(d) for d in eval_dirs]
    net = train_model(train_sessions, config)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    for session in [*train_sessions, *eval_sessions]:
        t0, probs = predict_emissions(net, session, config)
        path = out / f"{session.name}.emissions"
        save_emissions(path, config.grid, t0, WIN_SHIFT_S, probs)
        written[session.name] = path
        log.info("wrote %s (%d windows)", path, probs.shape[0])
    return written
