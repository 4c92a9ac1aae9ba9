"""Feeder scenario description and its JSON form.

Scenario JSON::

    {
      "name": "ieee13like",
      "nominal_voltage": 2401.777,          # volts line-to-neutral
      "source": {"bus": "650", "magnitude_pu": 1.0, "angles_deg": [0, -120, 120]},
      "lines": [
        {"from": "650", "to": "632", "phases": "ABC",
         "z_ohms": [[[r, x], [r, x], [r, x]], ...],   # 3x3, rows/cols A, B, C
         "shift_steps": 0}                          # k -> k * (-30 deg) downstream
      ],
      "loads": [{"bus": "671", "phase": "A", "kw": 385, "kvar": 220, "step": 0.02}],
      "snapshots": 1000, "seed": 42,
      "noise": {"magnitude_pu": 0.001, "angle_deg": 0.01},
      "load_walk": {"reversion": 0.01},
      "sample_period_us": 1000000, "start_us": 0
    }

Impedance entries for phases a line does not carry are ignored.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import InvalidInputError

PHASES = "ABC"


@dataclass(frozen=True, eq=False)
class Line:
    from_bus: str
    to_bus: str
    phases: str
    impedance: np.ndarray  # (3, 3) complex ohms
    shift_steps: int = 0

    @property
    def phase_mask(self) -> np.ndarray:
        return np.array([p in self.phases for p in PHASES])

    def masked_impedance(self) -> np.ndarray:
        m = self.phase_mask
        return self.impedance * np.outer(m, m)


@dataclass(frozen=True)
class Load:
    bus: str
    phase: str
    kw: float
    kvar: float
    step: float = 0.02


@dataclass(frozen=True, eq=False)
class FeederScenario:
    name: str
    nominal_voltage: float
    source_bus: str
    lines: tuple[Line, ...]
    loads: tuple[Load, ...]
    source_magnitude_pu: float = 1.0
    source_angles_deg: tuple[float, float, float] = (0.0, -120.0, 120.0)
    snapshots: int = 1000
    seed: int = 42
    magnitude_noise_pu: float = 0.001
    angle_noise_deg: float = 0.01
    reversion: float = 0.01
    sample_period_us: int = 1_000_000
    start_us: int = 0
    description: str = ""
    # derived in __post_init__
    buses: tuple[str, ...] = field(init=False)
    parent: dict = field(init=False, repr=False)
    bus_phases: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "loads", tuple(self.loads))
        self._build_topology()
        self._validate()

    def _build_topology(self):
        children: dict[str, list[Line]] = {}
        parent: dict[str, Line] = {}
        for ln in self.lines:
            if ln.to_bus in parent or ln.to_bus == self.source_bus:
                raise InvalidInputError(f"bus {ln.to_bus!r} is fed twice; feeder must be radial")
            parent[ln.to_bus] = ln
            children.setdefault(ln.from_bus, []).append(ln)
        order = [self.source_bus]
        phases = {self.source_bus: PHASES}
        queue = deque([self.source_bus])
        while queue:
            b = queue.popleft()
            for ln in children.get(b, []):
                if ln.to_bus in phases:
                    raise InvalidInputError(f"loop through bus {ln.to_bus!r}")
                if not set(ln.phases) <= set(phases[b]):
                    raise InvalidInputError(
                        f"line {ln.from_bus}-{ln.to_bus} carries {ln.phases} but {b} only has {phases[b]}"
                    )
                phases[ln.to_bus] = "".join(p for p in PHASES if p in ln.phases)
                order.append(ln.to_bus)
                queue.append(ln.to_bus)
        unreachable = set(parent) - set(phases)
        if unreachable:
            raise InvalidInputError(f"buses not connected to the source: {sorted(unreachable)}")
        object.__setattr__(self, "buses", tuple(order))
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "bus_phases", phases)

    def _validate(self):
        if self.nominal_voltage <= 0 or self.source_magnitude_pu <= 0:
            raise InvalidInputError("nominal voltage and source magnitude must be positive")
        if self.snapshots < 1:
            raise InvalidInputError("need at least one snapshot")
        if self.magnitude_noise_pu < 0 or self.angle_noise_deg < 0:
            raise InvalidInputError("noise standard deviations must be nonnegative")
        if not 0 <= self.reversion <= 1:
            raise InvalidInputError("load walk reversion must lie in [0, 1]")
        for ln in self.lines:
            z = ln.masked_impedance()
            if z.shape != (3, 3) or not np.allclose(z, z.T):
                raise InvalidInputError(f"line {ln.from_bus}-{ln.to_bus}: impedance must be symmetric 3x3")
            m = ln.phase_mask
            sub = z.real[np.ix_(m, m)]
            if not ln.phases or np.any(np.linalg.eigvalsh(sub) <= 0):
                raise InvalidInputError(
                    f"line {ln.from_bus}-{ln.to_bus}: resistance matrix must be positive definite"
                )
        for ld in self.loads:
            if ld.bus not in self.bus_phases or ld.phase not in self.bus_phases[ld.bus]:
                raise InvalidInputError(f"load on {ld.bus}.{ld.phase}: no such bus phase")
            if ld.kw < 0 or ld.kvar < 0 or ld.step < 0:
                raise InvalidInputError(f"load on {ld.bus}.{ld.phase}: kw, kvar and step must be nonnegative")

    # -- helpers ----------------------------------------------------------

    @property
    def bus_index(self) -> dict[str, int]:
        return {b: i for i, b in enumerate(self.buses)}

    def phase_mask(self) -> np.ndarray:
        """(n_bus, 3) bool, True where the bus has that phase."""
        return np.array([[p in self.bus_phases[b] for p in PHASES] for b in self.buses])

    def source_voltage(self) -> np.ndarray:
        ang = np.deg2rad(np.asarray(self.source_angles_deg, dtype=float))
        return self.source_magnitude_pu * self.nominal_voltage * np.exp(1j * ang)

    def base_load_matrix(self) -> np.ndarray:
        """(n_bus, 3) complex kVA at base level."""
        s = np.zeros((len(self.buses), 3), complex)
        idx = self.bus_index
        for ld in self.loads:
            s[idx[ld.bus], PHASES.index(ld.phase)] += ld.kw + 1j * ld.kvar
        return s

    def bus_shift_steps(self) -> dict[str, int]:
        """Accumulated transformer shift steps from the source to each bus."""
        steps = {self.source_bus: 0}
        for b in self.buses[1:]:
            ln = self.parent[b]
            steps[b] = steps[ln.from_bus] + ln.shift_steps
        return steps

    def downstream(self, bus: str) -> list[str]:
        out, frontier = [], [bus]
        while frontier:
            b = frontier.pop()
            out.append(b)
            frontier.extend(ln.to_bus for ln in self.lines if ln.from_bus == b)
        return out

    def with_updates(self, **changes) -> "FeederScenario":
        fields_ = {k: getattr(self, k) for k in _INIT_FIELDS}
        fields_.update(changes)
        return FeederScenario(**fields_)

    def with_transformer_shift(self, from_bus: str, to_bus: str, steps: int) -> "FeederScenario":
        lines = []
        found = False
        for ln in self.lines:
            if ln.from_bus == from_bus and ln.to_bus == to_bus:
                ln = replace(ln, shift_steps=int(steps))
                found = True
            lines.append(ln)
        if not found:
            raise InvalidInputError(f"no line {from_bus}-{to_bus}")
        return self.with_updates(lines=tuple(lines))

    def with_load_asymmetry(self, factor: float) -> "FeederScenario":
        """Scale each bus's per-phase deviation from its own mean load.

        ``factor`` 1 keeps the scenario, 0 balances every bus across the
        phases that carry load, values above 1 exaggerate the unbalance
        (clamped at zero load).
        """
        by_bus: dict[str, list[Load]] = {}
        for ld in self.loads:
            by_bus.setdefault(ld.bus, []).append(ld)
        new = []
        for bus_loads in by_bus.values():
            mkw = np.mean([ld.kw for ld in bus_loads])
            mkvar = np.mean([ld.kvar for ld in bus_loads])
            for ld in bus_loads:
                new.append(replace(
                    ld,
                    kw=max(0.0, float(mkw + factor * (ld.kw - mkw))),
                    kvar=max(0.0, float(mkvar + factor * (ld.kvar - mkvar))),
                ))
        return self.with_updates(loads=tuple(new))

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "nominal_voltage": self.nominal_voltage,
            "source": {
                "bus": self.source_bus,
                "magnitude_pu": self.source_magnitude_pu,
                "angles_deg": list(self.source_angles_deg),
            },
            "lines": [
                {
                    "from": ln.from_bus,
                    "to": ln.to_bus,
                    "phases": ln.phases,
                    "z_ohms": [[[float(z.real), float(z.imag)] for z in row] for row in ln.impedance],
                    "shift_steps": ln.shift_steps,
                }
                for ln in self.lines
            ],
            "loads": [
                {"bus": ld.bus, "phase": ld.phase, "kw": ld.kw, "kvar": ld.kvar, "step": ld.step}
                for ld in self.loads
            ],
            "snapshots": self.snapshots,
            "seed": self.seed,
            "noise": {"magnitude_pu": self.magnitude_noise_pu, "angle_deg": self.angle_noise_deg},
            "load_walk": {"reversion": self.reversion},
            "sample_period_us": self.sample_period_us,
            "start_us": self.start_us,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeederScenario":
        try:
            src = d["source"]
            lines = tuple(
                Line(
                    str(ln["from"]),
                    str(ln["to"]),
                    str(ln.get("phases", "ABC")),
                    np.array([[complex(*z) for z in row] for row in ln["z_ohms"]]),
                    int(ln.get("shift_steps", 0)),
                )
                for ln in d["lines"]
            )
            loads = tuple(
                Load(str(ld["bus"]), str(ld["phase"]), float(ld["kw"]), float(ld.get("kvar", 0.0)),
                     float(ld.get("step", 0.02)))
                for ld in d.get("loads", [])
            )
            noise = d.get("noise", {})
            return cls(
                name=str(d.get("name", "scenario")),
                description=str(d.get("description", "")),
                nominal_voltage=float(d["nominal_voltage"]),
                source_bus=str(src["bus"]),
                source_magnitude_pu=float(src.get("magnitude_pu", 1.0)),
                source_angles_deg=tuple(float(a) for a in src.get("angles_deg", (0.0, -120.0, 120.0))),
                lines=lines,
                loads=loads,
                snapshots=int(d.get("snapshots", 1000)),
                seed=int(d.get("seed", 42)),
                magnitude_noise_pu=float(noise.get("magnitude_pu", 0.001)),
                angle_noise_deg=float(noise.get("angle_deg", 0.01)),
                reversion=float(d.get("load_walk", {}).get("reversion", 0.01)),
                sample_period_us=int(d.get("sample_period_us", 1_000_000)),
                start_us=int(d.get("start_us", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"bad scenario: {exc!r}") from exc


_INIT_FIELDS = (
    "name", "nominal_voltage", "source_bus", "lines", "loads", "source_magnitude_pu",
    "source_angles_deg", "snapshots", "seed", "magnitude_noise_pu", "angle_noise_deg",
    "reversion", "sample_period_us", "start_us", "description",
)

BUNDLED = ("ieee13like", "twobus")


def load_scenario(path) -> FeederScenario:
    """Load a scenario JSON file.

    A bare bundled name (``ieee13like`` or ``ieee13like.json``) that does not
    exist on disk resolves to the copy shipped with the package.
    """
    p = Path(path)
    if not p.exists() and p.stem in BUNDLED and p.parent == Path("."):
        return bundled_scenario(p.stem)
    return _parse(p.read_text(encoding="utf-8"), str(path))


def bundled_scenario(name: str) -> FeederScenario:
    if name not in BUNDLED:
        raise InvalidInputError(f"no bundled scenario {name!r}; choose from {BUNDLED}")
    text = resources.files("phaseid.synthfeeder.data").joinpath(f"{name}.json").read_text("utf-8")
    return _parse(text, name)


def _parse(text: str, origin: str) -> FeederScenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{origin}: not valid JSON ({exc})") from exc
    return FeederScenario.from_dict(data)
