"""Phasor CSV parsing and two-bus time alignment.

The canonical file is long format, one sample per row::

    timestamp_us,bus_id,phase,magnitude_v,angle_deg

Rows may come in any order. Unmatched samples are dropped during
alignment, never interpolated.
"""
from __future__ import annotations

import csv
import math
import re
from collections import defaultdict
from dataclasses import asdict, dataclass
from functools import reduce
from pathlib import Path
from typing import Mapping

import numpy as np

from .core import BusRecord, ChannelSeries, Phase
from .errors import (
    DuplicateSampleError,
    InsufficientDataError,
    InsufficientOverlapError,
    InvalidInputError,
    ParseError,
    ValidationError,
)

CSV_HEADER = ("timestamp_us", "bus_id", "phase", "magnitude_v", "angle_deg")
DEFAULT_MIN_OVERLAP = 0.9

_INT_RE = re.compile(r"-?[0-9]+\Z")


@dataclass(frozen=True)
class AlignmentReport:
    paired_count: int
    dropped_ref: int
    dropped_tgt: int
    overlap_fraction: float

    def to_dict(self):
        return asdict(self)


def _infer_rate(t: np.ndarray) -> float:
    if len(t) < 2:
        return 1.0
    return 1e6 / float(np.median(np.diff(t)))


def parse_phasor_csv(path, nominal_voltages: Mapping[str, float] | None = None) -> list[BusRecord]:
    """Read a canonical phasor CSV into one BusRecord per bus id.

    Buses come back in order of first appearance, channels sorted A, B, C.
    ``nominal_voltages`` maps bus id to line-to-neutral volts; buses not
    listed get the median of all their magnitudes as nominal.
    """
    path = Path(path)
    groups: dict[tuple[str, str], list] = defaultdict(lambda: ([], [], [], []))
    bus_order: dict[str, None] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("empty file", line=1)
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise ParseError(f"expected header {','.join(CSV_HEADER)}", line=1)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 5:
                raise ParseError(f"expected 5 fields, got {len(row)}", line=line)
            ts, bus, phase, mag, ang = (f.strip() for f in row)
            if not _INT_RE.match(ts):
                raise ParseError(f"timestamp {ts!r} is not a base-10 integer", line=line)
            if not bus:
                raise ParseError("empty bus_id", line=line)
            if phase not in ("A", "B", "C"):
                raise ParseError(f"phase {phase!r} not in A, B, C", line=line)
            try:
                mag_v = float(mag)
                ang_v = float(ang)
            except ValueError:
                raise ParseError(f"non-numeric magnitude or angle in {row!r}", line=line) from None
            if not (math.isfinite(mag_v) and math.isfinite(ang_v)):
                raise ParseError("non-finite magnitude or angle", line=line)
            if not -180.0 <= ang_v < 180.0:
                raise ParseError(f"angle {ang_v} outside [-180, 180)", line=line)
            if mag_v <= 0:
                raise ValidationError(f"magnitude {mag_v} must be positive", line=line)
            bus_order.setdefault(bus, None)
            g = groups[(bus, phase)]
            g[0].append(int(ts))
            g[1].append(mag_v)
            g[2].append(ang_v)
            g[3].append(line)

    records = []
    for bus in bus_order:
        channels = []
        for phase in ("A", "B", "C"):
            if (bus, phase) not in groups:
                continue
            ts, mags, angs, lines = (np.asarray(x) for x in groups[(bus, phase)])
            order = np.argsort(ts, kind="stable")
            ts, mags, angs, lines = ts[order], mags[order], angs[order], lines[order]
            dup = np.flatnonzero(np.diff(ts) == 0)
            if len(dup):
                i = dup[0] + 1
                raise DuplicateSampleError(
                    f"duplicate sample for bus {bus!r} phase {phase} at t={ts[i]}", line=int(lines[i])
                )
            channels.append(ChannelSeries(Phase(phase), _infer_rate(ts), ts, mags, angs))
        if nominal_voltages and bus in nominal_voltages:
            nominal = float(nominal_voltages[bus])
        else:
            nominal = float(np.median(np.concatenate([c.magnitudes for c in channels])))
        records.append(BusRecord(bus, nominal, tuple(channels)))
    return records


def write_phasor_csv(path, records) -> None:
    """Write records in the canonical format, time-major then bus, phase."""
    rows = []
    for rec in records:
        for ch in rec.channels:
            # rounding to the printed precision can land on +180.000000
            ang = np.round(ch.angles, 6)
            ang = np.where(ang >= 180.0, ang - 360.0, ang)
            for t, m, a in zip(ch.timestamps.tolist(), ch.magnitudes.tolist(), ang.tolist()):
                rows.append((t, rec.bus_id, ch.phase_label.value, m, a))
    rows.sort(key=lambda r: r[0])  # stable: keeps bus/phase order within a timestamp
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        fh.writelines(f"{t},{b},{p},{m:.6f},{a:.6f}\n" for t, b, p, m, a in rows)


def _bus_timeline(rec: BusRecord) -> tuple[np.ndarray, int]:
    """Timestamps present on every channel, plus the longest channel length."""
    if any(len(c) == 0 for c in rec.channels):
        raise InsufficientDataError(f"bus {rec.bus_id!r} has an empty channel")
    common = reduce(np.intersect1d, (c.timestamps for c in rec.channels))
    return common, max(len(c) for c in rec.channels)


def _restrict(rec: BusRecord, keep_t: np.ndarray, new_t: np.ndarray) -> BusRecord:
    chans = []
    for c in rec.channels:
        idx = np.searchsorted(c.timestamps, keep_t)
        chans.append(ChannelSeries(c.phase_label, c.nominal_rate, new_t, c.magnitudes[idx], c.angles[idx]))
    return BusRecord(rec.bus_id, rec.nominal_voltage, tuple(chans))


def match_timestamps(ref_t: np.ndarray, tgt_t: np.ndarray, tolerance: float):
    """One-to-one nearest matching within ``tolerance``.

    Returns index arrays ``(ri, ti)``, both strictly increasing.
    """
    if len(ref_t) == 0 or len(tgt_t) == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    pos = np.searchsorted(tgt_t, ref_t)
    lo = np.clip(pos - 1, 0, len(tgt_t) - 1)
    hi = np.clip(pos, 0, len(tgt_t) - 1)
    d_lo = np.abs(ref_t - tgt_t[lo])
    d_hi = np.abs(ref_t - tgt_t[hi])
    ti = np.where(d_hi < d_lo, hi, lo)
    dist = np.minimum(d_lo, d_hi)
    ri = np.flatnonzero(dist <= tolerance)
    ti, dist = ti[ri], dist[ri]
    if len(ti) > 1 and np.any(np.diff(ti) == 0):
        # several reference samples claim one target sample: keep the closest
        order = np.lexsort((dist, ti))
        first = np.ones(len(order), bool)
        first[1:] = ti[order][1:] != ti[order][:-1]
        keep = np.sort(order[first])
        ri, ti = ri[keep], ti[keep]
    return ri, ti


def align_records(
    ref: BusRecord,
    tgt: BusRecord,
    tolerance: float | None = None,
    min_overlap: float = DEFAULT_MIN_OVERLAP,
) -> tuple[BusRecord, BusRecord, AlignmentReport]:
    """Pair two buses onto the reference bus's time base.

    ``tolerance`` is in microseconds and defaults to a quarter of the
    nominal sample period (the faster of the two buses). The aligned target
    carries the reference timestamps.
    """
    ref_t, ref_n = _bus_timeline(ref)
    tgt_t, tgt_n = _bus_timeline(tgt)
    rate = max(c.nominal_rate for c in ref.channels + tgt.channels)
    period = 1e6 / rate
    if tolerance is None:
        tolerance = period / 4.0
    if not 0 <= tolerance < period / 2.0:
        raise InvalidInputError(
            f"tolerance {tolerance} us must be in [0, half the sample period = {period / 2:g} us)"
        )

    ri, ti = match_timestamps(ref_t, tgt_t, tolerance)
    paired = len(ri)
    report = AlignmentReport(
        paired_count=paired,
        dropped_ref=ref_n - paired,
        dropped_tgt=tgt_n - paired,
        overlap_fraction=paired / min(ref_n, tgt_n),
    )
    if paired == 0 or report.overlap_fraction < min_overlap:
        raise InsufficientOverlapError(
            f"only {paired} of {min(ref_n, tgt_n)} samples overlap "
            f"({report.overlap_fraction:.3f} < {min_overlap})"
        )
    shared_t = ref_t[ri]
    return _restrict(ref, shared_t, shared_t), _restrict(tgt, tgt_t[ti], shared_t), report


def find_bus(records, bus_id: str) -> BusRecord:
    for rec in records:
        if rec.bus_id == bus_id:
            return rec
    raise InsufficientDataError(f"bus {bus_id!r} not found in data")
