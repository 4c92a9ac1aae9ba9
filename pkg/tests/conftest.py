import numpy as np
import pytest

from phaseid.core import BusRecord, ChannelSeries, wrap_angle
from phaseid.synthfeeder import bundled_scenario, generate_timeseries

NOMINAL_ANGLES = (0.0, -120.0, 120.0)


def make_bus(bus_id, mags, angs, phases="ABC", t=None, nominal=1.0, rate=1.0):
    """Build a BusRecord from (channels, n) magnitude and angle arrays."""
    mags = np.atleast_2d(np.asarray(mags, dtype=float))
    angs = np.atleast_2d(np.asarray(angs, dtype=float))
    n = mags.shape[1]
    if t is None:
        t = np.arange(n, dtype=np.int64) * int(1e6 / rate)
    chans = tuple(
        ChannelSeries(p, rate, t, m, wrap_angle(a)) for p, m, a in zip(phases, mags, angs)
    )
    return BusRecord(bus_id, nominal, chans)


def random_pair(rng, n=50, m_ref=3, m_tgt=3, spread=0.02):
    """Two aligned per-unit buses with independent random content."""
    ref = make_bus("ref", 1 + spread * rng.standard_normal((m_ref, n)),
                   rng.uniform(-180, 180, (m_ref, n)), phases="ABC"[:m_ref])
    tgt = make_bus("tgt", 1 + spread * rng.standard_normal((m_tgt, n)),
                   rng.uniform(-180, 180, (m_tgt, n)), phases="ABC"[:m_tgt])
    return ref, tgt


@pytest.fixture(scope="session")
def ieee13():
    return bundled_scenario("ieee13like")


@pytest.fixture(scope="session")
def ieee13_records(ieee13):
    return {r.bus_id: r for r in generate_timeseries(ieee13)}


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
