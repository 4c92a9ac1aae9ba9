"""Magnitude and angle scores for a candidate phase assignment.

For an assignment with ``m`` matched (reference, target) channel pairs over
``n`` aligned samples:

* ``f_inner``   mean over pairs and time of ``V_ref * V_tgt``
* ``f_pearson`` mean over pairs of the Pearson correlation of magnitudes
* ``g_angle``   mean over pairs and time of the wrapped angle difference,
  optionally after removing a per-pair multiple-of-30-degree shift

Every score is a mean of per-pair terms, so :func:`pair_matrices` computes
all reference x target pairs once and any assignment is a lookup.
"""
from __future__ import annotations

import numpy as np

from .core import (
    AngleMode,
    BusRecord,
    MagnitudeMode,
    PhaseAssignment,
    ScoringConfig,
    SignConvention,
    circular_median,
    snap_angle,
    wrap_angle,
)
from .errors import AlignmentError, InsufficientDataError, InsufficientVarianceError, InvalidInputError

SHIFT_STEP_DEG = 30.0


def check_aligned(ref: BusRecord, tgt: BusRecord) -> int:
    """Return the shared sample count, or raise if the records are not aligned."""
    t = ref.channels[0].timestamps
    for rec in (ref, tgt):
        for ch in rec.channels:
            if not np.array_equal(ch.timestamps, t):
                raise AlignmentError(
                    f"records {ref.bus_id!r} and {tgt.bus_id!r} are not aligned; run align_records first"
                )
    if len(t) == 0:
        raise InsufficientDataError("empty series")
    return len(t)


def _pairs(ref: BusRecord, tgt: BusRecord, a: PhaseAssignment):
    if len(a) != tgt.channel_count:
        raise InvalidInputError(f"assignment has {len(a)} entries, target has {tgt.channel_count} channels")
    if max(a.mapping) >= ref.channel_count:
        raise InvalidInputError(f"assignment {a.mapping} refers past {ref.channel_count} reference channels")
    r_idx = np.array(a.mapping)
    c_idx = np.arange(len(a))
    return r_idx, c_idx


# -- per-pair kernels ------------------------------------------------------

def inner_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``out[r, c]`` = time mean of ``x[r] * y[c]``."""
    return (x @ y.T) / x.shape[1]


def pearson_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    for name, arr in (("reference", x), ("target", y)):
        flat = np.ptp(arr, axis=1) == 0
        if np.any(flat):
            raise InsufficientVarianceError(
                f"{name} channel(s) {np.flatnonzero(flat).tolist()} have zero magnitude variance"
            )
    xc = x - x.mean(axis=1, keepdims=True)
    yc = y - y.mean(axis=1, keepdims=True)
    cov = xc @ yc.T
    norm = np.sqrt(np.outer((xc * xc).sum(axis=1), (yc * yc).sum(axis=1)))
    return np.clip(cov / norm, -1.0, 1.0)


def angle_distance_matrix(xa: np.ndarray, ya: np.ndarray, mode: AngleMode = AngleMode.RAW):
    """``out[r, c]`` = mean wrapped distance between reference r and target c angles.

    Also returns the removed shift per pair (all zero in raw mode).
    """
    mode = AngleMode(mode)
    r, c = xa.shape[0], ya.shape[0]
    out = np.empty((r, c))
    shifts = np.zeros((r, c))
    for i in range(r):
        for j in range(c):
            d = wrap_angle(ya[j] - xa[i])
            if mode is AngleMode.SHIFT_REMOVED:
                s = float(snap_angle(circular_median(d), SHIFT_STEP_DEG))
                shifts[i, j] = wrap_angle(s)
                d = wrap_angle(d - s)
            out[i, j] = np.abs(d).mean()
    return out, shifts


def pair_matrices(ref: BusRecord, tgt: BusRecord, magnitude_mode=MagnitudeMode.PEARSON,
                  angle_mode=AngleMode.RAW):
    """Magnitude and angle score matrices over every channel pair."""
    check_aligned(ref, tgt)
    x, y = ref.magnitude_matrix(), tgt.magnitude_matrix()
    if MagnitudeMode(magnitude_mode) is MagnitudeMode.PEARSON:
        fm = pearson_matrix(x, y)
    else:
        fm = inner_matrix(x, y)
    gm, _ = angle_distance_matrix(ref.angle_matrix(), tgt.angle_matrix(), angle_mode)
    return fm, gm


# -- single-assignment API -------------------------------------------------

def f_inner(ref: BusRecord, tgt: BusRecord, a: PhaseAssignment) -> float:
    check_aligned(ref, tgt)
    r_idx, c_idx = _pairs(ref, tgt, a)
    x = ref.magnitude_matrix()[r_idx]
    y = tgt.magnitude_matrix()[c_idx]
    return float((x * y).mean())


def f_pearson(ref: BusRecord, tgt: BusRecord, a: PhaseAssignment) -> float:
    check_aligned(ref, tgt)
    r_idx, c_idx = _pairs(ref, tgt, a)
    x = ref.magnitude_matrix()[r_idx]
    y = tgt.magnitude_matrix()[c_idx]
    m = pearson_matrix(x, y)
    return float(np.diagonal(m).mean())


def g_angle(ref: BusRecord, tgt: BusRecord, a: PhaseAssignment, mode=AngleMode.RAW) -> float:
    check_aligned(ref, tgt)
    r_idx, c_idx = _pairs(ref, tgt, a)
    xa = ref.angle_matrix()[r_idx]
    ya = tgt.angle_matrix()[c_idx]
    total = 0.0
    for k in range(len(a)):
        gm, _ = angle_distance_matrix(xa[k:k + 1], ya[k:k + 1], mode)
        total += gm[0, 0]
    return total / len(a)


def magnitude_score(ref, tgt, a, mode=MagnitudeMode.PEARSON) -> float:
    if MagnitudeMode(mode) is MagnitudeMode.PEARSON:
        return f_pearson(ref, tgt, a)
    return f_inner(ref, tgt, a)


def objective(f: float, g: float, cfg: ScoringConfig) -> float:
    """Weighted objective; larger is a better match."""
    if cfg.sign_convention is SignConvention.PENALIZE_ANGLE:
        return cfg.alpha * f - cfg.beta * g
    return cfg.alpha * f + cfg.beta * g
