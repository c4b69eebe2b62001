"""Online filtering and offline decoding over the heart-rate grid.

The filter runs the classic sum-product recursion in linear space with a
per-step normalizer: predict through the transition matrix, weight by the
window's emission, renormalize.  The normalizer doubles as a surprise
measure and underflow guard.  The decoder is the max-product analogue in
log space and returns the single most probable bin path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .emission import EmissionSeries
from .errors import BeliefCollapseError, DecodeFailureError, ParameterError
from .grid import BinDistribution, HrGrid
from .transition import TransitionModel

COLLAPSE_EPS = 1e-300


def _check_same_grid(grid: HrGrid, other: HrGrid, what: str) -> None:
    if grid != other:
        raise ParameterError(f"{what} lives on a different grid than the transition model")


def forward_step(prior: BinDistribution, transition: TransitionModel,
                 emission: BinDistribution) -> tuple[BinDistribution, float]:
    """One predict-update step; returns the posterior and its normalizer."""
    _check_same_grid(transition.grid, prior.grid, "prior")
    _check_same_grid(transition.grid, emission.grid, "emission")
    predicted = prior.probs @ transition.matrix
    unnorm = emission.probs * predicted
    z = float(unnorm.sum())
    if z <= COLLAPSE_EPS:
        raise BeliefCollapseError(
            f"belief collapsed: normalizer {z} <= {COLLAPSE_EPS}", step=None
        )
    return BinDistribution(prior.grid, unnorm / z), z


def _filter_iter(emission_rows: Iterable[np.ndarray], matrix: np.ndarray,
                 init: np.ndarray, reset_on_collapse: bool) -> Iterator[tuple[np.ndarray, float]]:
    """Yield (posterior, normalizer) per step; belief kept in linear space."""
    c = init.shape[0]
    belief = None
    for t, e in enumerate(emission_rows):
        if belief is None:
            unnorm = init * e
        else:
            unnorm = e * (belief @ matrix)
        z = float(unnorm.sum())
        if z <= COLLAPSE_EPS:
            if not reset_on_collapse:
                raise BeliefCollapseError(
                    f"belief collapsed at step {t}: normalizer {z} <= {COLLAPSE_EPS}", step=t
                )
            # restart from an uninformative prior; fall back to the emission
            # itself if even that carries no overlap
            unnorm = e * (np.full(c, 1.0 / c) @ matrix) if t > 0 else e / c
            z = float(unnorm.sum())
            if z <= COLLAPSE_EPS:
                unnorm, z = e.copy(), 1.0
        belief = unnorm / z
        yield belief, z


@dataclass(frozen=True)
class BeliefTrace:
    """Filtered posteriors for one session plus per-step summaries."""

    grid: HrGrid
    t0: float
    dt: float
    posteriors: np.ndarray = field(repr=False)   # (steps, bin_count)
    normalizers: np.ndarray = field(repr=False)  # (steps,)

    def __post_init__(self):
        post = np.asarray(self.posteriors, dtype=np.float64)
        z = np.asarray(self.normalizers, dtype=np.float64)
        if post.ndim != 2 or post.shape[1] != self.grid.bin_count:
            raise ParameterError(f"posteriors must be (steps, {self.grid.bin_count})")
        if z.shape != (post.shape[0],):
            raise ParameterError("normalizers must match the number of steps")
        post = post.copy()
        post.flags.writeable = False
        z = z.copy()
        z.flags.writeable = False
        object.__setattr__(self, "posteriors", post)
        object.__setattr__(self, "normalizers", z)

    def __len__(self) -> int:
        return self.posteriors.shape[0]

    def posterior(self, t: int) -> BinDistribution:
        return BinDistribution(self.grid, self.posteriors[t])

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def means(self) -> np.ndarray:
        return self.posteriors @ self.grid.centers

    @property
    def entropies(self) -> np.ndarray:
        p = self.posteriors
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p > 0.0, p * np.log(p), 0.0)
        return -terms.sum(axis=1)

    @property
    def stds(self) -> np.ndarray:
        centers = self.grid.centers
        var = (self.posteriors * (centers[None, :] - self.means[:, None]) ** 2).sum(axis=1)
        return np.sqrt(np.clip(var, 0.0, None))

    @property
    def mode_indices(self) -> np.ndarray:
        return self.posteriors.argmax(axis=1)

    @property
    def mode_bpm(self) -> np.ndarray:
        return self.grid.centers[self.mode_indices]


def _as_rows_and_times(emissions, transition: TransitionModel,
                       t0: float | None, dt: float | None):
    if isinstance(emissions, EmissionSeries):
        _check_same_grid(transition.grid, emissions.grid, "emission series")
        rows = emissions.probs
        t0 = emissions.t0 if t0 is None else t0
        dt = emissions.dt if dt is None else dt
    else:
        dists = list(emissions)
        if not dists:
            raise ParameterError("no emissions to filter")
        for d in dists:
            _check_same_grid(transition.grid, d.grid, "emission")
        rows = np.stack([d.probs for d in dists])
        t0 = 0.0 if t0 is None else t0
        dt = 1.0 if dt is None else dt
    return rows, t0, dt


def _init_vector(init: BinDistribution | None, transition: TransitionModel) -> np.ndarray:
    if init is None:
        c = transition.grid.bin_count
        return np.full(c, 1.0 / c)
    _check_same_grid(transition.grid, init.grid, "initial belief")
    return init.probs


def filter_beliefs(emissions, transition: TransitionModel,
                   init: BinDistribution | None = None, t0: float | None = None,
                   dt: float | None = None, reset_on_collapse: bool = False) -> BeliefTrace:
    """Run the forward filter over a whole emission series.

    `emissions` is an EmissionSeries or a sequence of BinDistribution.  The
    first step applies the emission to the initial belief directly (uniform
    when not given); later steps predict through the transition first.
    """
    rows, t0, dt = _as_rows_and_times(emissions, transition, t0, dt)
    init_vec = _init_vector(init, transition)
    posts = np.empty_like(rows)
    zs = np.empty(rows.shape[0])
    for t, (belief, z) in enumerate(
            _filter_iter(rows, transition.matrix, init_vec, reset_on_collapse)):
        posts[t] = belief
        zs[t] = z
    return BeliefTrace(grid=transition.grid, t0=t0, dt=dt, posteriors=posts, normalizers=zs)


def filter_stream(emissions, transition: TransitionModel,
                  init: BinDistribution | None = None,
                  reset_on_collapse: bool = False) -> Iterator[tuple[BinDistribution, float]]:
    """Streaming filter: yields (posterior, normalizer) without keeping history."""
    if isinstance(emissions, EmissionSeries):
        rows: Iterable[np.ndarray] = emissions.probs
        grid = emissions.grid
        _check_same_grid(transition.grid, grid, "emission series")
        init_vec = _init_vector(init, transition)
        for belief, z in _filter_iter(rows, transition.matrix, init_vec, reset_on_collapse):
            yield BinDistribution(transition.grid, belief), z
    else:
        init_vec = _init_vector(init, transition)

        def gen():
            for d in emissions:
                _check_same_grid(transition.grid, d.grid, "emission")
                yield d.probs

        for belief, z in _filter_iter(gen(), transition.matrix, init_vec, reset_on_collapse):
            yield BinDistribution(transition.grid, belief), z


def viterbi(emissions, transition: TransitionModel,
            init: BinDistribution | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Most probable bin path given all evidence (max-product in log space).

    Returns (bin indices, bin-center BPM).  Ties break toward the lowest
    bin index at every argmax.
    """
    rows, _, _ = _as_rows_and_times(emissions, transition, None, None)
    init_vec = _init_vector(init, transition)
    n_steps, c = rows.shape
    with np.errstate(divide="ignore"):
        log_t = np.log(transition.matrix)
        log_e = np.log(rows)
        log_init = np.log(init_vec)

    score = log_init + log_e[0]
    if not np.isfinite(score.max()):
        raise DecodeFailureError("no state has positive probability at step 0", step=0)
    back = np.zeros((n_steps, c), dtype=np.intp)
    for t in range(1, n_steps):
        cand = score[:, None] + log_t          # (prev, next)
        best_prev = cand.argmax(axis=0)        # first max -> lowest bin index
        score = cand[best_prev, np.arange(c)] + log_e[t]
        back[t] = best_prev
        if not np.isfinite(score.max()):
            raise DecodeFailureError(f"every path has probability zero at step {t}", step=t)

    path = np.empty(n_steps, dtype=np.intp)
    path[-1] = int(score.argmax())
    for t in range(n_steps - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, transition.grid.centers[path]
