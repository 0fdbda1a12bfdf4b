"""Time integration driver: trajectories of records, step logs and snapshots."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from .admissible import discrete_equilibrium
from .config import SimulationConfig, initial_condition
from .diagnostics import DiagnosticsConfig, entropy_S, record
from .distribution import Distribution
from .errors import LFDError
from .kernels import KernelParams
from .stepper import SimulationState, corner_fields, stable_dt, step

__all__ = ["StepLog", "Trajectory", "run", "diagnostics_config", "reference_state", "entropy_increments"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepLog:
    step: int
    t: float
    dt: float
    mass: float
    S_eps: float
    kappa0: float
    clipped_mass: float


@dataclass
class Trajectory:
    """Output of :func:`run`.

    ``snapshots`` holds ``(t, Distribution)`` pairs with strictly increasing
    times; ``records`` the diagnostics rows; ``steps`` one cheap entry per
    step (the initial state is step 0). ``error`` is set when the run stopped
    early and the rest is the partial trajectory up to that point.
    """

    config: SimulationConfig
    reference: Distribution
    snapshots: list = field(default_factory=list)
    records: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    error: Exception | None = None

    @property
    def final(self) -> Distribution:
        return self.snapshots[-1][1]

    @property
    def ok(self) -> bool:
        return self.error is None


def diagnostics_config(cfg: SimulationConfig) -> DiagnosticsConfig:
    return DiagnosticsConfig(s_list=tuple(cfg.s_list), eta_list=tuple(cfg.eta_list), p_list=tuple(cfg.p_list),
                             exp_moment=cfg.exp_moment, gamma=cfg.gamma, max_pair_n=cfg.max_pair_n)


def reference_state(f: Distribution) -> Distribution:
    """Grid Fermi-Dirac state carrying the mass, momentum and temperature of ``f``.

    Falls back to ``f`` itself when the moments admit no such state (for
    instance a saturated initial datum).
    """
    rho = f.mass()
    u = f.momentum() / rho
    theta = (f.energy() / rho - float(u @ u)) / 3.0
    try:
        return discrete_equilibrium(f.grid, f.epsilon, rho, u, theta)
    except LFDError as exc:
        log.warning("no grid equilibrium for the initial moments (%s); using the initial state", exc)
        return f


def _log_entry(state: SimulationState, dt: float) -> StepLog:
    f = state.f
    return StepLog(state.step_count, state.t, dt, f.mass(), entropy_S(f), f.kappa0(), state.clipped_mass)


def run(cfg: SimulationConfig, on_record=None, on_snapshot=None) -> Trajectory:
    """Integrate ``cfg`` to ``t_final``.

    Records are taken every ``diagnostics_every`` steps and at the final time;
    snapshots every ``snapshot_every`` steps (0 means first and last only).
    ``on_record(record)`` and ``on_snapshot(t, f)`` are called as they are
    produced, which lets callers stream output. Errors raised by the stepper
    stop the run and are attached to the returned partial trajectory.
    """
    grid = cfg.grid
    params = KernelParams(cfg.gamma, cfg.nu_value)
    f0 = initial_condition(cfg.initial, grid, cfg.epsilon)
    traj = Trajectory(cfg, reference_state(f0))
    dcfg = diagnostics_config(cfg)
    state = SimulationState(0.0, f0, params, collisions=cfg.collisions, clip=cfg.clip, backend=cfg.backend)

    def take_record(st):
        rec = record(st.t, st.f, traj.reference, dcfg, backend=cfg.backend)
        traj.records.append(rec)
        if on_record is not None:
            on_record(rec)

    def take_snapshot(st):
        traj.snapshots.append((st.t, st.f))
        if on_snapshot is not None:
            on_snapshot(st.t, st.f)

    try:
        take_record(state)
        take_snapshot(state)
        traj.steps.append(_log_entry(state, 0.0))
        while state.t < cfg.t_final:
            fields = corner_fields(state.f, params, cfg.backend) if cfg.collisions else None
            dt = stable_dt(state, fields, cfg.cfl)
            remaining = cfg.t_final - state.t
            # avoid a sliver of a last step
            if dt >= remaining or remaining - dt < 1e-3 * dt:
                dt = remaining
            state = step(state, dt, cfg.scheme, fields)
            if dt == remaining:
                state = replace(state, t=cfg.t_final)
            traj.steps.append(_log_entry(state, dt))
            last = state.t >= cfg.t_final
            if last or state.step_count % cfg.diagnostics_every == 0:
                take_record(state)
            if last or (cfg.snapshot_every > 0 and state.step_count % cfg.snapshot_every == 0):
                take_snapshot(state)
    except LFDError as exc:
        log.error("run stopped at t = %.6g (step %d): %s", state.t, state.step_count, exc)
        traj.error = exc
    return traj


def entropy_increments(traj: Trajectory) -> list[float]:
    """``S(t_{k+1}) - S(t_k)`` over consecutive steps."""
    s = [entry.S_eps for entry in traj.steps]
    return [b - a for a, b in zip(s, s[1:])]
