"""Forward-backward sweep power flow for radial three-phase feeders.

Loads are wye-connected constant power. All snapshots of a run are swept
together as one ``(T, n_bus, 3)`` array; a snapshot's result does not
depend on the others, only the iteration count is shared.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError, SolverDivergenceError
from .scenario import PHASES, FeederScenario

TOLERANCE_PU = 1e-6
MAX_ITERATIONS = 50


@dataclass(frozen=True, eq=False)
class PowerFlowResult:
    voltages: np.ndarray  # (T, n_bus, 3) complex volts, nan on absent phases
    iterations: int
    mismatch_pu: float  # last max per-phase voltage update


def _load_array(scenario: FeederScenario, loads) -> np.ndarray:
    """Coerce loads to a (T, n_bus, 3) complex kVA array."""
    if isinstance(loads, dict):
        s = np.zeros((len(scenario.buses), 3), complex)
        idx = scenario.bus_index
        for (bus, phase), kva in loads.items():
            if bus not in idx or phase not in scenario.bus_phases[bus]:
                raise InvalidInputError(f"load on {bus}.{phase}: no such bus phase")
            s[idx[bus], PHASES.index(phase)] += complex(kva)
        loads = s
    s = np.asarray(loads, dtype=complex)
    if s.ndim == 2:
        s = s[None]
    if s.shape[1:] != (len(scenario.buses), 3):
        raise InvalidInputError(f"load array shape {s.shape} does not match {len(scenario.buses)} buses x 3")
    if np.any(s.real < 0):
        raise InvalidInputError("real power of loads must be nonnegative")
    if np.any(s[:, ~scenario.phase_mask()] != 0):
        raise InvalidInputError("load placed on a phase the bus does not have")
    return s


def solve_power_flow(scenario: FeederScenario, loads, tol: float = TOLERANCE_PU,
                     max_iter: int = MAX_ITERATIONS) -> PowerFlowResult:
    """Solve one or many snapshots.

    ``loads`` is a (n_bus, 3) or (T, n_bus, 3) complex kVA array in
    ``scenario.buses`` order, or a dict ``{(bus, phase): kVA}``.
    """
    s_va = _load_array(scenario, loads) * 1e3
    n_t, n_bus = s_va.shape[0], len(scenario.buses)
    mask = scenario.phase_mask()
    idx = scenario.bus_index
    parent = np.array([idx[scenario.parent[b].from_bus] if i else -1 for i, b in enumerate(scenario.buses)])
    z = np.zeros((n_bus, 3, 3), complex)
    for i, b in enumerate(scenario.buses[1:], start=1):
        z[i] = scenario.parent[b].masked_impedance()

    v_src = scenario.source_voltage()
    v = np.broadcast_to(v_src, (n_t, n_bus, 3)).copy()
    base = scenario.nominal_voltage
    mismatch = np.inf
    for it in range(1, max_iter + 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            i_load = np.where(mask, np.conj(s_va / v), 0.0)
        # backward sweep: accumulate branch currents towards the source
        i_branch = i_load.copy()
        for b in range(n_bus - 1, 0, -1):
            i_branch[:, parent[b]] += i_branch[:, b]
        # forward sweep: propagate drops away from the source
        v_new = np.empty_like(v)
        v_new[:, 0] = v_src
        for b in range(1, n_bus):
            v_new[:, b] = v_new[:, parent[b]] - i_branch[:, b] @ z[b].T
        if not np.all(np.isfinite(v_new[:, mask])):
            raise SolverDivergenceError(f"non-finite voltages at iteration {it}")
        mismatch = float(np.max(np.abs(v_new - v)[:, mask])) / base
        v = v_new
        if mismatch < tol:
            break
    else:
        raise SolverDivergenceError(
            f"no convergence after {max_iter} iterations (mismatch {mismatch:.3g} pu)"
        )
    v = np.where(mask, v, np.nan + 1j * np.nan)
    return PowerFlowResult(v, it, mismatch)


def solve_snapshot(scenario: FeederScenario, loads_at_t) -> dict[str, np.ndarray]:
    """Voltages of one snapshot: bus id -> length-3 complex array (nan if absent)."""
    res = solve_power_flow(scenario, loads_at_t)
    if res.voltages.shape[0] != 1:
        raise InvalidInputError("solve_snapshot takes a single snapshot of loads")
    return {b: res.voltages[0, i] for i, b in enumerate(scenario.buses)}
