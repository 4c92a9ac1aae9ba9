"""Synthetic phasor time series from a feeder scenario.

Randomness comes from ``numpy.random.Generator(PCG64(seed))`` and is drawn
in a fixed order: load-walk innovations ``(snapshots, n_loads)``, then
magnitude noise and angle noise, each ``(snapshots, n_channels)`` with
channels in bus order then A, B, C. The same seed gives the same CSV bytes.
"""
from __future__ import annotations

import numpy as np

from ..core import BusRecord, ChannelSeries, Phase, wrap_angle
from ..ingest import write_phasor_csv
from .powerflow import solve_power_flow
from .scenario import PHASES, FeederScenario

SHIFT_STEP_DEG = -30.0


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def load_profiles(scenario: FeederScenario, rng: np.random.Generator) -> np.ndarray:
    """(snapshots, n_bus, 3) complex kVA from a mean-reverting log random walk.

    Each load's log multiplier follows
    ``u[t] = (1 - reversion) * u[t-1] + step * z[t]`` with ``u[-1] = 0``,
    and active and reactive power scale together.
    """
    n_t = scenario.snapshots
    z = rng.standard_normal((n_t, len(scenario.loads)))
    steps = np.array([ld.step for ld in scenario.loads])
    keep = 1.0 - scenario.reversion
    u = np.empty_like(z)
    prev = np.zeros(len(scenario.loads))
    for t in range(n_t):
        prev = keep * prev + steps * z[t]
        u[t] = prev
    mult = np.exp(u)
    s = np.zeros((n_t, len(scenario.buses), 3), complex)
    idx = scenario.bus_index
    for k, ld in enumerate(scenario.loads):
        s[:, idx[ld.bus], PHASES.index(ld.phase)] += mult[:, k] * (ld.kw + 1j * ld.kvar)
    return s


def generate_timeseries(scenario: FeederScenario) -> list[BusRecord]:
    """Simulate every snapshot and return one BusRecord per bus, in volts."""
    rng = make_rng(scenario.seed)
    loads = load_profiles(scenario, rng)
    pf = solve_power_flow(scenario, loads)
    mask = scenario.phase_mask()
    n_t = scenario.snapshots
    n_ch = int(mask.sum())
    mag_noise = rng.standard_normal((n_t, n_ch)) * scenario.magnitude_noise_pu * scenario.nominal_voltage
    ang_noise = rng.standard_normal((n_t, n_ch)) * scenario.angle_noise_deg

    t = scenario.start_us + scenario.sample_period_us * np.arange(n_t, dtype=np.int64)
    rate = 1e6 / scenario.sample_period_us
    shifts = scenario.bus_shift_steps()
    records = []
    ch = 0
    for i, bus in enumerate(scenario.buses):
        channels = []
        for p, phase in enumerate(PHASES):
            if not mask[i, p]:
                continue
            v = pf.voltages[:, i, p]
            mag = np.abs(v) + mag_noise[:, ch]
            ang = wrap_angle(np.degrees(np.angle(v)) + SHIFT_STEP_DEG * shifts[bus] + ang_noise[:, ch])
            channels.append(ChannelSeries(Phase(phase), rate, t, mag, ang))
            ch += 1
        records.append(BusRecord(bus, scenario.nominal_voltage, tuple(channels)))
    return records


def simulate_to_csv(scenario: FeederScenario, path) -> list[BusRecord]:
    records = generate_timeseries(scenario)
    write_phasor_csv(path, records)
    return records
