"""Shared fixtures: synthetic session directories and one trained export."""

import pytest

from hremit import TrainConfig, train_and_export

from trainer_helpers import write_synth_session


@pytest.fixture(scope="session")
def session_dirs(tmp_path_factory):
    """Two training sessions plus one held-out session, 180 s each."""
    root = tmp_path_factory.mktemp("sessions")
    dirs = {}
    for k, name in enumerate(["train_a", "train_b"]):
        d = root / name
        write_synth_session(d, name, walk_seed=500 + k, cfg_seed=k)
        dirs[name] = d
    held = root / "held_out"
    write_synth_session(held, "held_out", walk_seed=999, cfg_seed=77)
    dirs["held_out"] = held
    return dirs


@pytest.fixture(scope="session")
def trained(tmp_path_factory, session_dirs):
    """One full training run; emissions exported for every session."""
    out = tmp_path_factory.mktemp("emissions")
    config = TrainConfig(epochs=30, seed=0)
    written = train_and_export(
        [session_dirs["train_a"], session_dirs["train_b"]],
        out,
        config,
        eval_dirs=[session_dirs["held_out"]],
    )
    return {"written": written, "config": config, "out": out}
