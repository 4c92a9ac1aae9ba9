"""Mergeable running statistics for streaming identification.

A :class:`PairStatistics` covers every (reference channel, target channel)
pair of a bus pair, so one pass over a stream can score all candidate
assignments. Updates are O(1) per sample and two statistics over disjoint
windows merge exactly (pairwise moment merge for the centred terms).

Shift removal in streaming form keeps one distance accumulator per
30-degree shift and picks the accumulator nearest the running circular
mean of the signed difference.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import AngleMode, BusRecord, MagnitudeMode, PhaseAssignment, ScoringConfig, wrap_angle
from .errors import InsufficientDataError, InsufficientVarianceError, InvalidInputError
from .scoring import SHIFT_STEP_DEG, check_aligned, objective

N_SHIFTS = int(round(360 / SHIFT_STEP_DEG))
_SHIFTS = SHIFT_STEP_DEG * np.arange(N_SHIFTS)


@dataclass(frozen=True, eq=False)
class PairStatistics:
    count: int
    mean_ref: np.ndarray  # (r,)
    mean_tgt: np.ndarray  # (c,)
    m2_ref: np.ndarray  # (r,) centred sum of squares
    m2_tgt: np.ndarray  # (c,)
    comoment: np.ndarray  # (r, c) centred cross sum
    sum_product: np.ndarray  # (r, c)
    sum_distance: np.ndarray  # (r, c) wrapped angle distance, degrees
    sum_residual: np.ndarray  # (N_SHIFTS, r, c) distance after removing k*30 degrees
    sum_phasor: np.ndarray  # (r, c) complex, unit phasors of the signed difference

    @classmethod
    def empty(cls, n_ref: int = 3, n_tgt: int = 3) -> "PairStatistics":
        r, c = n_ref, n_tgt
        return cls(
            0,
            np.zeros(r), np.zeros(c), np.zeros(r), np.zeros(c),
            np.zeros((r, c)), np.zeros((r, c)), np.zeros((r, c)),
            np.zeros((N_SHIFTS, r, c)), np.zeros((r, c), complex),
        )

    @classmethod
    def from_arrays(cls, x, xa, y, ya) -> "PairStatistics":
        """Batch statistics from ``(channels, n)`` magnitude and angle arrays."""
        x, xa, y, ya = (np.asarray(v, dtype=float) for v in (x, xa, y, ya))
        n = x.shape[1]
        if n == 0:
            return cls.empty(x.shape[0], y.shape[0])
        mx, my = x.mean(axis=1), y.mean(axis=1)
        xc, yc = x - mx[:, None], y - my[:, None]
        m2x, m2y = (xc * xc).sum(axis=1), (yc * yc).sum(axis=1)
        # constant channels must finalize as exactly zero variance
        m2x[np.ptp(x, axis=1) == 0] = 0.0
        m2y[np.ptp(y, axis=1) == 0] = 0.0
        d = wrap_angle(ya[None, :, :] - xa[:, None, :])  # (r, c, n)
        resid = np.abs(wrap_angle(d[None] - _SHIFTS[:, None, None, None])).sum(axis=-1)
        rad = np.deg2rad(d)
        return cls(
            n, mx, my, m2x, m2y, xc @ yc.T, x @ y.T, np.abs(d).sum(axis=-1), resid,
            np.cos(rad).sum(axis=-1) + 1j * np.sin(rad).sum(axis=-1),
        )

    @classmethod
    def from_records(cls, ref: BusRecord, tgt: BusRecord) -> "PairStatistics":
        check_aligned(ref, tgt)
        return cls.from_arrays(ref.magnitude_matrix(), ref.angle_matrix(),
                               tgt.magnitude_matrix(), tgt.angle_matrix())

    @property
    def shape(self) -> tuple[int, int]:
        return self.comoment.shape

    def merge(self, other: "PairStatistics") -> "PairStatistics":
        if self.shape != other.shape:
            raise InvalidInputError(f"cannot merge statistics of shape {self.shape} and {other.shape}")
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        na, nb = self.count, other.count
        n = na + nb
        dx = other.mean_ref - self.mean_ref
        dy = other.mean_tgt - self.mean_tgt
        w = na * nb / n
        return PairStatistics(
            n,
            self.mean_ref + dx * nb / n,
            self.mean_tgt + dy * nb / n,
            self.m2_ref + other.m2_ref + dx * dx * w,
            self.m2_tgt + other.m2_tgt + dy * dy * w,
            self.comoment + other.comoment + np.outer(dx, dy) * w,
            self.sum_product + other.sum_product,
            self.sum_distance + other.sum_distance,
            self.sum_residual + other.sum_residual,
            self.sum_phasor + other.sum_phasor,
        )

    # -- finalization --------------------------------------------------

    def _pairs(self, a: PhaseAssignment):
        if self.count == 0:
            raise InsufficientDataError("no samples folded into statistics")
        r, c = self.shape
        if len(a) != c or max(a.mapping) >= r:
            raise InvalidInputError(f"assignment {a.mapping} does not fit {r}x{c} statistics")
        return np.array(a.mapping), np.arange(c)

    def f_inner(self, a: PhaseAssignment) -> float:
        ri, ci = self._pairs(a)
        return float(self.sum_product[ri, ci].mean() / self.count)

    def f_pearson(self, a: PhaseAssignment) -> float:
        ri, ci = self._pairs(a)
        vx, vy = self.m2_ref[ri], self.m2_tgt[ci]
        if np.any(vx == 0) or np.any(vy == 0):
            raise InsufficientVarianceError("zero magnitude variance on a matched channel")
        rho = np.clip(self.comoment[ri, ci] / np.sqrt(vx * vy), -1.0, 1.0)
        return float(rho.mean())

    def shift_estimate(self) -> np.ndarray:
        """Running circular-mean offset (degrees) per channel pair."""
        return np.rad2deg(np.angle(self.sum_phasor))

    def g_angle(self, a: PhaseAssignment, mode=AngleMode.RAW) -> float:
        ri, ci = self._pairs(a)
        if AngleMode(mode) is AngleMode.RAW:
            return float(self.sum_distance[ri, ci].mean() / self.count)
        k = np.mod(np.round(self.shift_estimate()[ri, ci] / SHIFT_STEP_DEG), N_SHIFTS).astype(int)
        return float(self.sum_residual[k, ri, ci].mean() / self.count)

    def score(self, a: PhaseAssignment, cfg: ScoringConfig) -> tuple[float, float, float]:
        """``(f, g, objective)`` for one assignment."""
        if cfg.magnitude_mode is MagnitudeMode.PEARSON:
            f = self.f_pearson(a)
        else:
            f = self.f_inner(a)
        g = self.g_angle(a, cfg.angle_mode)
        return f, g, objective(f, g, cfg)


def _unpack(sample_tuple):
    mags, angs = [], []
    for s in sample_tuple:
        if hasattr(s, "magnitude"):
            mags.append(s.magnitude)
            angs.append(s.angle)
        else:
            m, a = s
            mags.append(m)
            angs.append(a)
    return np.array(mags, dtype=float), np.array(angs, dtype=float)


def update_statistics(stats: PairStatistics, ref_sample_tuple, tgt_sample_tuple) -> PairStatistics:
    """Fold one aligned sample into ``stats``.

    Each tuple holds one entry per channel, either a PhasorSample or a
    ``(magnitude, angle)`` pair. Returns a new object.
    """
    x, xa = _unpack(ref_sample_tuple)
    y, ya = _unpack(tgt_sample_tuple)
    if (len(x), len(y)) != stats.shape:
        raise InvalidInputError(f"sample shape {(len(x), len(y))} does not match statistics {stats.shape}")
    n1 = stats.count + 1
    dx = x - stats.mean_ref
    dy = y - stats.mean_tgt
    mean_x = stats.mean_ref + dx / n1
    mean_y = stats.mean_tgt + dy / n1
    d = wrap_angle(ya[None, :] - xa[:, None])
    rad = np.deg2rad(d)
    return replace(
        stats,
        count=n1,
        mean_ref=mean_x,
        mean_tgt=mean_y,
        m2_ref=stats.m2_ref + dx * (x - mean_x),
        m2_tgt=stats.m2_tgt + dy * (y - mean_y),
        comoment=stats.comoment + np.outer(dx, y - mean_y),
        sum_product=stats.sum_product + np.outer(x, y),
        sum_distance=stats.sum_distance + np.abs(d),
        sum_residual=stats.sum_residual + np.abs(wrap_angle(d[None] - _SHIFTS[:, None, None])),
        sum_phasor=stats.sum_phasor + (np.cos(rad) + 1j * np.sin(rad)),
    )
