"""Brute-force assignment search and the multi-window sweep."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import BusRecord, MagnitudeScale, PhaseAssignment, ScoredAssignment, ScoringConfig
from .errors import InvalidInputError
from .scoring import check_aligned, objective, pair_matrices


def enumerate_assignments(m: int, n_ref: int = 3) -> list[PhaseAssignment]:
    """All injective maps from ``m`` target channels to ``n_ref`` reference channels.

    Lexicographic order. With three reference phases there are 3, 6 and 6
    maps for one-, two- and three-channel targets.
    """
    if not 1 <= m <= 3:
        raise InvalidInputError(f"target channel count must be 1, 2 or 3, got {m}")
    if not 1 <= n_ref <= 3 or m > n_ref:
        raise InvalidInputError(f"cannot map {m} target channels into {n_ref} reference channels")
    return [PhaseAssignment(p) for p in itertools.permutations(range(n_ref), m)]


@dataclass(frozen=True)
class IdentificationResult:
    ranked: tuple[ScoredAssignment, ...]
    margin: float
    window: tuple[int, int, int]  # (first timestamp, last timestamp, n)
    ref_labels: tuple[str, ...] = ()
    tgt_labels: tuple[str, ...] = ()

    @property
    def winner(self) -> PhaseAssignment:
        return self.ranked[0].assignment

    def score_of(self, a: PhaseAssignment) -> ScoredAssignment:
        for s in self.ranked:
            if s.assignment == a:
                return s
        raise KeyError(a)

    def to_dict(self) -> dict:
        return {
            "window": {"start_us": self.window[0], "end_us": self.window[1], "n": self.window[2]},
            "reference_phases": list(self.ref_labels),
            "target_phases": list(self.tgt_labels),
            "winner": self.winner.code(self.ref_labels or None),
            "margin": self.margin,
            "ranked": [
                {
                    "rank": s.rank,
                    "assignment": s.assignment.code(self.ref_labels or None),
                    "mapping": list(s.assignment.mapping),
                    "f": s.f_score,
                    "g": s.g_score,
                    "objective": s.objective,
                }
                for s in self.ranked
            ],
        }


@dataclass(frozen=True)
class SweepResult:
    windows: tuple[tuple[int, IdentificationResult], ...]

    @property
    def consistent(self) -> bool:
        winners = {res.winner for _, res in self.windows}
        return len(winners) == 1

    @property
    def lengths(self) -> list[int]:
        return [n for n, _ in self.windows]

    def to_dict(self) -> dict:
        return {
            "consistent": self.consistent,
            "windows": [{"length": n, **res.to_dict()} for n, res in self.windows],
        }


def prepare(rec: BusRecord, cfg: ScoringConfig) -> BusRecord:
    if cfg.magnitude_scale is MagnitudeScale.PER_UNIT:
        return rec.to_per_unit()
    return rec


def rank_scores(scores: list[tuple[PhaseAssignment, float, float, float]]) -> list[ScoredAssignment]:
    """Sort by objective descending, ties broken by the mapping tuple."""
    order = sorted(scores, key=lambda s: (-s[3], s[0].mapping))
    return [ScoredAssignment(a, f, g, j, rank) for rank, (a, f, g, j) in enumerate(order, start=1)]


def identify(ref: BusRecord, tgt: BusRecord, cfg: ScoringConfig | None = None) -> IdentificationResult:
    """Score every assignment of target channels onto reference phases.

    Records must already be aligned. Magnitudes are per-unitized on each
    bus's nominal voltage unless ``cfg.magnitude_scale`` says volts.
    """
    cfg = cfg or ScoringConfig()
    n = check_aligned(ref, tgt)
    ref_s, tgt_s = prepare(ref, cfg), prepare(tgt, cfg)
    fm, gm = pair_matrices(ref_s, tgt_s, cfg.magnitude_mode, cfg.angle_mode)
    scores = []
    cols = np.arange(tgt.channel_count)
    for a in enumerate_assignments(tgt.channel_count, ref.channel_count):
        rows = np.array(a.mapping)
        f = float(fm[rows, cols].mean())
        g = float(gm[rows, cols].mean())
        scores.append((a, f, g, objective(f, g, cfg)))
    ranked = rank_scores(scores)
    margin = ranked[0].objective - ranked[1].objective if len(ranked) > 1 else 0.0
    t = ref.channels[0].timestamps
    return IdentificationResult(
        tuple(ranked),
        float(margin),
        (int(t[0]), int(t[-1]), n),
        tuple(p.value for p in ref.phase_labels),
        tuple(p.value for p in tgt.phase_labels),
    )


def sweep_lengths(n: int, count: int = 21, schedule: str = "linear") -> list[int]:
    """Window lengths from ``n/count`` up to ``n``, strictly increasing."""
    if count < 1:
        raise InvalidInputError("need at least one window")
    if count > n:
        raise InvalidInputError(f"cannot make {count} distinct windows from {n} samples")
    if schedule == "linear":
        raw = np.linspace(n / count, n, count)
    elif schedule == "geometric":
        raw = np.geomspace(max(n / count, 2), n, count)
    else:
        raise InvalidInputError(f"unknown schedule {schedule!r}")
    lengths = [max(2, int(round(v))) for v in raw]
    lengths[-1] = n
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise InvalidInputError(f"schedule {schedule!r} gives repeated window lengths for n={n}")
    return lengths


def window_sweep(ref: BusRecord, tgt: BusRecord, cfg: ScoringConfig | None = None,
                 lengths=None) -> SweepResult:
    """Run :func:`identify` on growing prefixes of the aligned data."""
    n = check_aligned(ref, tgt)
    if lengths is None:
        lengths = sweep_lengths(n)
    lengths = [int(x) for x in lengths]
    if not lengths:
        raise InvalidInputError("no window lengths given")
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise InvalidInputError("window lengths must be strictly increasing")
    if lengths[0] < 1 or lengths[-1] > n:
        raise InvalidInputError(f"window lengths must lie in [1, {n}]")
    out = []
    for w in lengths:
        out.append((w, identify(ref.head(w), tgt.head(w), cfg)))
    return SweepResult(tuple(out))
