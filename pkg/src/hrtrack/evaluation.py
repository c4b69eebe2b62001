"""Accuracy, uncertainty and calibration metrics for HR predictions.

Point accuracy is summarized per session (MAE) and per activity (MAPE).
Probabilistic quality uses the negative log-likelihood of the true bin and
a coverage-vs-confidence curve built from highest-density regions on an
upsampled grid.  The rejection sweep measures whether the model's own
uncertainty (entropy or std) ranks its errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .emission import EmissionSeries
from .errors import (
    DomainError,
    InsufficientDataError,
    ParameterError,
    RangeError,
)
from .grid import BinDistribution, HrGrid
from .inference import BeliefTrace

NLL_FLOOR = 1e-12
FINE_BINS = 1000

DEFAULT_LEVELS = tuple(round(0.05 * k, 2) for k in range(1, 21))


@dataclass(frozen=True)
class PredictionRecord:
    """One scored prediction, ready for metric aggregation."""

    session_id: str
    time_s: float
    predicted_bpm: float
    truth_bpm: float
    entropy: float | None = None
    std: float | None = None
    tag: str | None = None


def _as_prob_matrix(posteriors) -> tuple[np.ndarray, HrGrid]:
    if isinstance(posteriors, (BeliefTrace, EmissionSeries)):
        return posteriors.probs if isinstance(posteriors, EmissionSeries) else posteriors.posteriors, posteriors.grid
    dists: Sequence[BinDistribution] = list(posteriors)
    if not dists:
        raise InsufficientDataError("no posteriors supplied")
    grid = dists[0].grid
    for d in dists:
        if d.grid != grid:
            raise ParameterError("posteriors mix different grids")
    return np.stack([d.probs for d in dists]), grid


def mae_by_session(records: Sequence[PredictionRecord]) -> tuple[dict, float, float]:
    """Per-session MAE plus (mean, sample std) across sessions."""
    if not records:
        raise InsufficientDataError("no prediction records")
    per_session: dict[str, list[float]] = {}
    for r in records:
        per_session.setdefault(r.session_id, []).append(abs(r.predicted_bpm - r.truth_bpm))
    maes = {sid: float(np.mean(errs)) for sid, errs in sorted(per_session.items())}
    values = np.array(list(maes.values()))
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return maes, float(values.mean()), std


def nll(posteriors, truths, grid: HrGrid | None = None) -> float:
    """Mean negative log-likelihood of the true bin, floored at NLL_FLOOR."""
    probs, g = _as_prob_matrix(posteriors)
    if grid is not None and grid != g:
        raise ParameterError("posterior grid does not match the requested grid")
    truths = np.asarray(truths, dtype=np.float64)
    if truths.shape != (probs.shape[0],):
        raise ParameterError(
            f"need one truth per posterior: {truths.shape} vs {probs.shape[0]} steps"
        )
    outside = [float(t) for t in truths if not g.contains(t)]
    if outside:
        raise RangeError(
            f"ground truth outside the grid [{g.y_min}, {g.y_max}): {outside[:5]}"
        )
    idx = np.array([g.bin_index(t) for t in truths])
    picked = probs[np.arange(probs.shape[0]), idx]
    return float(-np.log(np.maximum(picked, NLL_FLOOR)).mean())


def _fine_weights(coarse: HrGrid, m: int) -> np.ndarray:
    """(m, c) matrix applying the same linear interpolation as grid.upsample."""
    fine = HrGrid(m, coarse.y_min, coarse.y_max)
    cols = []
    eye = np.eye(coarse.bin_count)
    for k in range(coarse.bin_count):
        cols.append(np.interp(fine.centers, coarse.centers, eye[k]))
    return np.stack(cols, axis=1)


def calibration_curve(posteriors, truths, levels: Sequence[float] = DEFAULT_LEVELS,
                      fine_bins: int = FINE_BINS) -> list[tuple[float, float]]:
    """Empirical coverage of highest-density credible regions.

    Each posterior is linearly upsampled to `fine_bins` bins; the credible
    region at confidence q is the smallest set of highest-probability fine
    bins with total mass >= q.  Returned pairs are (q, observed coverage).
    Regions are nested, so coverage is nondecreasing in q by construction.
    """
    probs, g = _as_prob_matrix(posteriors)
    truths = np.asarray(truths, dtype=np.float64)
    if truths.shape != (probs.shape[0],):
        raise ParameterError("need one truth per posterior")
    levels = [float(q) for q in levels]
    if not levels or any(not 0.0 < q <= 1.0 for q in levels):
        raise ParameterError(f"confidence levels must lie in (0, 1], got {levels}")
    fine = HrGrid(fine_bins, g.y_min, g.y_max)
    true_idx = np.array([fine.bin_index(t) for t in truths])
    weights = _fine_weights(g, fine_bins)

    n = probs.shape[0]
    mass_before = np.empty(n)
    chunk = 2048
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        fine_probs = probs[lo:hi] @ weights.T
        fine_probs /= fine_probs.sum(axis=1, keepdims=True)
        order = np.argsort(-fine_probs, axis=1, kind="stable")
        cum = np.cumsum(np.take_along_axis(fine_probs, order, axis=1), axis=1)
        rank = np.empty_like(order)
        np.put_along_axis(rank, order, np.arange(fine_bins)[None, :].repeat(hi - lo, 0), axis=1)
        rows = np.arange(hi - lo)
        pos = rank[rows, true_idx[lo:hi]]
        mass_before[lo:hi] = cum[rows, pos] - fine_probs[rows, true_idx[lo:hi]]

    return [(q, float(np.mean(mass_before < q))) for q in levels]


def rejection_sweep(records: Sequence[PredictionRecord],
                    fractions: Sequence[float] = tuple(round(0.5 + 0.05 * k, 2) for k in range(11)),
                    uncertainty: str = "entropy") -> list[tuple[float, float]]:
    """MAE after keeping only the most confident fraction of records.

    For retained fraction f, the ceil((1-f)*N) records with the highest
    uncertainty are dropped (ties resolved by record order).  f = 1.0 keeps
    everything and reproduces the plain MAE exactly.
    """
    if not records:
        raise InsufficientDataError("no prediction records")
    if uncertainty not in ("entropy", "std"):
        raise ParameterError(f"uncertainty must be 'entropy' or 'std', got {uncertainty!r}")
    u = [getattr(r, uncertainty) for r in records]
    if any(v is None for v in u):
        raise ParameterError(f"records are missing the {uncertainty!r} field")
    u = np.asarray(u, dtype=np.float64)
    errors = np.array([abs(r.predicted_bpm - r.truth_bpm) for r in records])
    order = np.argsort(u, kind="stable")  # ascending uncertainty, ties by record order
    n = len(records)
    out = []
    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise ParameterError(f"retained fraction must lie in (0, 1], got {f}")
        drop = math.ceil((1.0 - f) * n)
        if drop >= n:
            raise ParameterError(f"fraction {f} would drop all {n} records")
        kept = np.sort(order[:n - drop])  # record order, so f=1.0 is exactly the plain MAE
        out.append((float(f), float(errors[kept].mean())))
    return out


def grouped_mape(records: Sequence[PredictionRecord]) -> dict[str, float]:
    """Mean absolute percentage error per activity tag."""
    if not records:
        raise InsufficientDataError("no prediction records")
    groups: dict[str, list[float]] = {}
    for r in records:
        if r.tag is None:
            raise ParameterError("every record needs an activity tag for grouped MAPE")
        if r.truth_bpm == 0.0:
            raise DomainError(f"zero ground truth at t={r.time_s}s makes MAPE undefined")
        groups.setdefault(r.tag, []).append(abs(r.predicted_bpm - r.truth_bpm) / abs(r.truth_bpm))
    return {tag: float(np.mean(vals)) for tag, vals in sorted(groups.items())}
