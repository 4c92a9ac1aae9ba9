"""Domain types, angle arithmetic and per-unit scaling.

Angles are degrees in ``[-180, 180)``; timestamps are integer microseconds.
Series are held as read-only numpy arrays so a one-hour 120 sps record
(432,000 samples per channel) stays cheap to slice and score.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import AlignmentError, InvalidInputError


class Phase(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"
    UNKNOWN = "Unknown"


PHASE_ORDER = {Phase.A: 0, Phase.B: 1, Phase.C: 2, Phase.UNKNOWN: 3}


class MagnitudeMode(str, enum.Enum):
    INNER_PRODUCT = "inner"
    PEARSON = "pearson"


class AngleMode(str, enum.Enum):
    RAW = "raw"
    SHIFT_REMOVED = "shift-removed"


class SignConvention(str, enum.Enum):
    # J = alpha*F - beta*G
    PENALIZE_ANGLE = "penalize"
    # J = alpha*F + beta*G, the sum taken at face value
    ADD_ANGLE = "add"


class MagnitudeScale(str, enum.Enum):
    PER_UNIT = "per-unit"
    VOLTS = "volts"


def wrap_angle(angle):
    """Wrap degrees into ``[-180, 180)``. Works on scalars and arrays."""
    a = np.asarray(angle, dtype=float)
    w = np.mod(a + 180.0, 360.0) - 180.0
    # mod can round up to exactly 360 for inputs just below a wrap point
    w = np.where(w >= 180.0, w - 360.0, w)
    if np.ndim(w) == 0:
        return float(w)
    return w


def angular_distance(a, b):
    """Shortest arc between two angles in degrees, in ``[0, 180]``.

    Accepts scalars or broadcastable arrays; scalars in, float out.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidInputError("angular_distance needs finite angles")
    d = np.mod(np.abs(a - b), 360.0)
    d = np.minimum(d, 360.0 - d)
    if np.ndim(d) == 0:
        return float(d)
    return d


def circular_mean(angles) -> float:
    a = np.deg2rad(np.asarray(angles, dtype=float))
    return wrap_angle(np.rad2deg(np.arctan2(np.sin(a).sum(), np.cos(a).sum())))


def circular_median(angles) -> float:
    """Median direction of a set of angles, in degrees.

    The sample is rotated so its circular mean sits at 0, cut at the
    antipode and the ordinary median taken. For concentrated data (all
    points within a half circle of the mean) this is the arc-distance
    minimiser; it is equivariant under a common rotation.
    """
    a = np.asarray(angles, dtype=float)
    if a.size == 0:
        raise InvalidInputError("circular_median of an empty sample")
    center = circular_mean(a)
    return wrap_angle(center + float(np.median(wrap_angle(a - center))))


def snap_angle(angle, step: float = 30.0):
    """Nearest multiple of ``step`` degrees."""
    return step * np.round(np.asarray(angle, dtype=float) / step)


@dataclass(frozen=True)
class PhasorSample:
    t: int
    magnitude: float
    angle: float

    def __post_init__(self):
        if not (math.isfinite(self.magnitude) and self.magnitude > 0):
            raise InvalidInputError(f"magnitude must be positive, got {self.magnitude}")
        if not (-180.0 <= self.angle < 180.0):
            raise InvalidInputError(f"angle {self.angle} outside [-180, 180)")


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ChannelSeries:
    """Voltage phasor time series for one conductor."""

    phase_label: Phase
    nominal_rate: float
    timestamps: np.ndarray
    magnitudes: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phase_label", Phase(self.phase_label))
        t = _frozen_array(self.timestamps, np.int64)
        mag = _frozen_array(self.magnitudes, float)
        ang = _frozen_array(self.angles, float)
        if not (t.ndim == mag.ndim == ang.ndim == 1) or not (len(t) == len(mag) == len(ang)):
            raise InvalidInputError("timestamps, magnitudes and angles must be 1-d and equal length")
        if not (self.nominal_rate > 0 and math.isfinite(self.nominal_rate)):
            raise InvalidInputError("nominal_rate must be positive")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise InvalidInputError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(mag)) or np.any(mag <= 0):
            raise InvalidInputError("magnitudes must be positive and finite")
        if not np.all(np.isfinite(ang)) or np.any(ang < -180.0) or np.any(ang >= 180.0):
            raise InvalidInputError("angles must lie in [-180, 180)")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "magnitudes", mag)
        object.__setattr__(self, "angles", ang)

    @classmethod
    def from_samples(cls, phase_label, nominal_rate, samples: Sequence[PhasorSample]):
        return cls(
            phase_label,
            nominal_rate,
            [s.t for s in samples],
            [s.magnitude for s in samples],
            [s.angle for s in samples],
        )

    def __len__(self):
        return len(self.timestamps)

    @property
    def samples(self) -> list[PhasorSample]:
        return list(self.iter_samples())

    def iter_samples(self) -> Iterator[PhasorSample]:
        for t, m, a in zip(self.timestamps.tolist(), self.magnitudes.tolist(), self.angles.tolist()):
            yield PhasorSample(t, m, a)

    def take(self, index) -> "ChannelSeries":
        return ChannelSeries(
            self.phase_label,
            self.nominal_rate,
            self.timestamps[index],
            self.magnitudes[index],
            self.angles[index],
        )

    def head(self, n: int) -> "ChannelSeries":
        return self.take(slice(0, n))

    def __eq__(self, other):
        if not isinstance(other, ChannelSeries):
            return NotImplemented
        return (
            self.phase_label == other.phase_label
            and self.nominal_rate == other.nominal_rate
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.magnitudes, other.magnitudes)
            and np.array_equal(self.angles, other.angles)
        )

    __hash__ = object.__hash__


def per_unit(series: ChannelSeries, base: float) -> ChannelSeries:
    """Divide magnitudes by ``base`` volts; angles and timestamps untouched."""
    if not (math.isfinite(base) and base > 0):
        raise InvalidInputError(f"per-unit base must be positive, got {base}")
    return ChannelSeries(
        series.phase_label,
        series.nominal_rate,
        series.timestamps,
        series.magnitudes / base,
        series.angles,
    )


@dataclass(frozen=True, eq=False)
class BusRecord:
    bus_id: str
    nominal_voltage: float
    channels: tuple[ChannelSeries, ...]

    def __post_init__(self):
        chans = tuple(self.channels)
        if not 1 <= len(chans) <= 3:
            raise InvalidInputError(f"bus {self.bus_id!r}: need 1 to 3 channels, got {len(chans)}")
        if not (math.isfinite(self.nominal_voltage) and self.nominal_voltage > 0):
            raise InvalidInputError("nominal_voltage must be positive")
        object.__setattr__(self, "channels", chans)

    @property
    def phase_labels(self) -> tuple[Phase, ...]:
        return tuple(c.phase_label for c in self.channels)

    @property
    def channel_count(self) -> int:
        return len(self.channels)

    def is_aligned(self) -> bool:
        t0 = self.channels[0].timestamps
        return all(np.array_equal(t0, c.timestamps) for c in self.channels[1:])

    @property
    def timestamps(self) -> np.ndarray:
        if not self.is_aligned():
            raise AlignmentError(f"bus {self.bus_id!r}: channels have different timestamps")
        return self.channels[0].timestamps

    def __len__(self):
        return len(self.timestamps)

    def magnitude_matrix(self) -> np.ndarray:
        """Magnitudes as a ``(channels, n)`` array."""
        return np.vstack([c.magnitudes for c in self.channels])

    def angle_matrix(self) -> np.ndarray:
        return np.vstack([c.angles for c in self.channels])

    def head(self, n: int) -> "BusRecord":
        return BusRecord(self.bus_id, self.nominal_voltage, tuple(c.head(n) for c in self.channels))

    def take(self, index) -> "BusRecord":
        return BusRecord(self.bus_id, self.nominal_voltage, tuple(c.take(index) for c in self.channels))

    def to_per_unit(self) -> "BusRecord":
        """Per-unitize on the bus nominal voltage; the result has nominal 1.0."""
        chans = tuple(per_unit(c, self.nominal_voltage) for c in self.channels)
        return BusRecord(self.bus_id, 1.0, chans)

    def __eq__(self, other):
        if not isinstance(other, BusRecord):
            return NotImplemented
        return (
            self.bus_id == other.bus_id
            and self.nominal_voltage == other.nominal_voltage
            and self.channels == other.channels
        )

    __hash__ = object.__hash__


@dataclass(frozen=True, order=True)
class PhaseAssignment:
    """Injective map from target channel index to reference channel index.

    ``mapping[c]`` is the 0-based reference channel matched with target
    channel ``c``. With three channels each side this is a permutation and
    corresponds to the triple (i, j, k) read off per target conductor.
    """

    mapping: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(x) for x in self.mapping)
        if not m:
            raise InvalidInputError("assignment needs at least one channel")
        if any(x < 0 for x in m) or len(set(m)) != len(m):
            raise InvalidInputError(f"assignment {m} is not injective")
        object.__setattr__(self, "mapping", m)

    def __len__(self):
        return len(self.mapping)

    def pairs(self) -> list[tuple[int, int]]:
        """(reference index, target index) for each matched pair."""
        return [(r, c) for c, r in enumerate(self.mapping)]

    def code(self, ref_labels: Sequence[Phase | str] | None = None) -> str:
        """Reference phase letters in target-channel order, e.g. ``"BCA"``."""
        if ref_labels is None:
            return "".join("ABC"[r] for r in self.mapping)
        return "".join(Phase(ref_labels[r]).value[0] for r in self.mapping)

    def is_identity(self) -> bool:
        return self.mapping == tuple(range(len(self.mapping)))


@dataclass(frozen=True)
class ScoringConfig:
    alpha: float = 1.0
    beta: float = 1.0
    magnitude_mode: MagnitudeMode = MagnitudeMode.PEARSON
    angle_mode: AngleMode = AngleMode.RAW
    sign_convention: SignConvention = SignConvention.PENALIZE_ANGLE
    magnitude_scale: MagnitudeScale = MagnitudeScale.PER_UNIT

    def __post_init__(self):
        object.__setattr__(self, "magnitude_mode", MagnitudeMode(self.magnitude_mode))
        object.__setattr__(self, "angle_mode", AngleMode(self.angle_mode))
        object.__setattr__(self, "sign_convention", SignConvention(self.sign_convention))
        object.__setattr__(self, "magnitude_scale", MagnitudeScale(self.magnitude_scale))
        a, b = float(self.alpha), float(self.beta)
        if not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b < 0:
            raise InvalidInputError("alpha and beta must be finite and nonnegative")
        if a == 0 and b == 0:
            raise InvalidInputError("alpha and beta cannot both be zero")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "magnitude_mode": self.magnitude_mode.value,
            "angle_mode": self.angle_mode.value,
            "sign_convention": self.sign_convention.value,
            "magnitude_scale": self.magnitude_scale.value,
        }


@dataclass(frozen=True)
class ScoredAssignment:
    assignment: PhaseAssignment
    f_score: float
    g_score: float
    objective: float
    rank: int = field(default=0)
