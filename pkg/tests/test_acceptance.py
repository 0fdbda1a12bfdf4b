"""Acceptance gate: one test per criterion, each reporting a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines appear at
the end of the session. The entropy/Pauli/relaxation matrix is shared by
criteria 3, 5, 6 and 7 and takes about ten minutes on one CPU.
"""
import math
import time

import numpy as np
import pytest

from lfd.admissible import random_bumps
from lfd.cli import main
from lfd.coefficients import cross_check_backends
from lfd.config import InitialSpec, SimulationConfig, initial_condition
from lfd.convergence import conservation_rates, equilibrium_residual, observed_orders
from lfd.equilibrium import solve_fermi_dirac
from lfd.errors import BoundViolation
from lfd.grid import build_grid, integrate
from lfd.kernels import KernelParams
from lfd.oracles import ORACLES, make_generator, run_suite
from lfd.simulation import entropy_increments, run
from lfd.stepper import SimulationState, assemble_Q, corner_fields, stable_dt, step

pytestmark = pytest.mark.slow

REFINEMENT_N = (17, 25, 33)
MATRIX = [(g, e) for g in (-0.5, -1.0, -1.5) for e in (0.0, 0.05, 0.2)]
MATRIX_NU = 1e-3
# a residual this small relative to the operator scale is round-off, not truncation error
ROUNDOFF = 1e-12

MASS_DRIFTS: dict = {}


def _report(record_property, number, passed, detail):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    record_property("acceptance", line)
    print(line)
    return passed


def _max_step_drift(masses):
    return max((abs(b - a) / abs(a) for a, b in zip(masses, masses[1:])), default=0.0)


@pytest.fixture(scope="module")
def matrix():
    out = {}
    for gamma, eps in MATRIX:
        cfg = SimulationConfig(gamma=gamma, epsilon=eps, R=6.0, N=17, nu=MATRIX_NU, t_final=5.0,
                               diagnostics_every=200, initial=InitialSpec(kind="two-bump"))
        traj = run(cfg)
        out[(gamma, eps)] = traj
        MASS_DRIFTS[f"matrix gamma={gamma} eps={eps}"] = _max_step_drift([s.mass for s in traj.steps])
    return out


def _refinement_scale(n):
    # operator scale on the same grid: the collision part applied to a far-from-equilibrium state
    grid = build_grid(6.0, n)
    f = random_bumps(make_generator(0, 0), grid, 0.05)
    Q = assemble_Q(f, corner_fields(f, KernelParams(-1.0, 0.01)), 0.01, viscosity=False)
    return integrate(grid, np.abs(Q) * (1 + grid.speed_sq))


def test_criterion_01_equilibrium_recovery(record_property):
    t0 = time.perf_counter()
    eq = solve_fermi_dirac(1.0, (0.0, 0.0, 0.0), 1.0, 1e-8)
    elapsed = time.perf_counter() - t0
    da, db = abs(eq.a_eps - (2 * math.pi) ** -1.5), abs(eq.b_eps - 0.5)
    ok = da <= 1e-8 and db <= 1e-8 and elapsed < 1.0
    assert _report(record_property, 1, ok, f"|a - a*| = {da:.2e}, |b - 1/2| = {db:.2e}, {elapsed:.3f} s")


def test_criterion_02_steady_state_consistency(record_property):
    t0 = time.perf_counter()
    hs = [build_grid(6.0, n).h for n in REFINEMENT_N]
    res = [equilibrium_residual(n, -1.0, 0.05, 6.0, 0.01) for n in REFINEMENT_N]
    elapsed = time.perf_counter() - t0
    orders = observed_orders(hs, res)[1:]
    rel = [r / _refinement_scale(n) for r, n in zip(res, REFINEMENT_N)]
    converging = all(p >= 1.5 for p in orders)
    exact = max(rel) <= ROUNDOFF
    ok = (converging or exact) and elapsed < 300
    branch = "observed order" if converging else "residual at round-off" if exact else "neither"
    detail = (f"||Q(M)||_1 = {', '.join(f'{r:.2e}' for r in res)}; orders {', '.join(f'{p:.2f}' for p in orders)}; "
              f"rel {max(rel):.1e}; {branch}; {elapsed:.0f} s")
    assert _report(record_property, 2, ok, detail)


def test_criterion_03_conservation(record_property, matrix):
    rates = [conservation_rates(n, -1.0, 0.05, 6.0, 0.01, seed=0) for n in REFINEMENT_N]
    scales = [_refinement_scale(n) for n in REFINEMENT_N]
    mom = [r[0] for r in rates]
    ener = [r[1] for r in rates]
    monotone = all(b < a for a, b in zip(mom, mom[1:])) and all(b < a for a, b in zip(ener, ener[1:]))
    exact = max(max(m, e) / s for m, e, s in zip(mom, ener, scales)) <= ROUNDOFF
    mass = max(MASS_DRIFTS.values())
    ok = mass <= 1e-12 and (monotone or exact)
    detail = (f"max mass drift/step {mass:.1e} over {len(MASS_DRIFTS)} runs; momentum {', '.join(f'{m:.1e}' for m in mom)}; "
              f"energy {', '.join(f'{e:.1e}' for e in ener)}; {'monotone' if monotone else 'round-off' if exact else 'neither'}")
    assert _report(record_property, 3, ok, detail)


def test_criterion_04_viscous_energy_law(record_property):
    grid = build_grid(6.0, 33)
    nu = grid.h
    cfg = SimulationConfig(gamma=-1.0, epsilon=0.05, R=6.0, N=33, nu=nu, collisions=False)
    f = initial_condition(InitialSpec(kind="two-bump"), grid, cfg.epsilon)
    state = SimulationState(0.0, f, KernelParams(cfg.gamma, nu), collisions=False)
    rho = f.mass()
    energies, times, masses = [f.energy()], [0.0], [rho]
    while state.t < 1.0 - 1e-12:
        dt = min(stable_dt(state, None, cfg.cfl), 1.0 - state.t)
        state = step(state, dt, cfg.scheme)
        energies.append(state.f.energy())
        times.append(state.t)
        masses.append(state.f.mass())
    MASS_DRIFTS["viscous N=33"] = _max_step_drift(masses)
    rates = np.diff(energies) / np.diff(times)
    target = 6 * nu * rho
    worst = float(np.max(np.abs(rates - target))) / target
    ok = worst <= 0.2
    assert _report(record_property, 4, ok, f"d/dt E in [{rates.min():.4f}, {rates.max():.4f}] vs 6 nu rho = {target:.4f}; "
                                           f"worst rel {worst:.3f}")


def test_criterion_05_entropy_monotonicity(record_property, matrix):
    worst = {k: min(entropy_increments(t)) for k, t in matrix.items()}
    errs = [k for k, t in matrix.items() if t.error is not None]
    lo = min(worst.values())
    ok = lo >= -1e-8 and not errs
    assert _report(record_property, 5, ok, f"min dS per step {lo:.2e} over {len(matrix)} runs; stopped runs {errs}")


def test_criterion_06_pauli_bound(record_property, matrix):
    bad = [k for k, t in matrix.items() if isinstance(t.error, BoundViolation)]
    clipped = max(t.steps[-1].clipped_mass for t in matrix.values())
    ok = not bad and all(t.ok for t in matrix.values())
    assert _report(record_property, 6, ok, f"BoundViolation in {bad}; clipped mass {clipped:.1e}")


def test_criterion_07_relaxation(record_property, matrix):
    lines, ok = [], True
    for (gamma, eps), traj in matrix.items():
        H = [r.H_rel for r in traj.records]
        decreasing = all(b < a for a, b in zip(H, H[1:]))
        ref = traj.reference
        d0 = integrate(ref.grid, np.abs(traj.snapshots[0][1].values - ref.values))
        d1 = integrate(ref.grid, np.abs(traj.final.values - ref.values))
        kmin = min(s.kappa0 for s in traj.steps if s.t >= 1.0)
        cell = decreasing and d1 <= 0.2 * d0 and kmin >= 0.5
        ok &= cell
        lines.append(f"({gamma},{eps}) L1 ratio {d1 / d0:.3f} k0min {kmin:.3f}{'' if decreasing else ' H not decreasing'}")
    assert _report(record_property, 7, ok, "; ".join(lines))


def test_criterion_08_oracle_suite(record_property):
    t0 = time.perf_counter()
    summary = run_suite(2024, trials=100, grid=build_grid(6.0, 17))
    elapsed = time.perf_counter() - t0
    failed = {k: c["failed"] for k, c in summary.items() if c["failed"]}
    vac = max(c["vacuous"] / (c["passed"] + c["failed"]) for c in summary.values())
    ok = set(summary) == set(ORACLES) and len(summary) == 9 and not failed and vac <= 0.1 and elapsed < 600
    assert _report(record_property, 8, ok, f"failures {failed}; max vacuous fraction {vac:.2f}; {elapsed:.0f} s")


def test_criterion_09_backend_equivalence(record_property):
    grid = build_grid(6.0, 17)
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(20):
        f = random_bumps(rng, grid, float(rng.choice([0.0, 0.05, 0.2])))
        params = KernelParams(float(rng.uniform(-1.9, -0.1)), float(rng.uniform(grid.h, 1.0)))
        worst = max(worst, cross_check_backends(f, params, rtol=math.inf))
    assert _report(record_property, 9, worst <= 1e-10, f"max fft/direct discrepancy {worst:.2e}")


def test_criterion_10_determinism(record_property, tmp_path):
    cfg = tmp_path / "verify.ini"
    cfg.write_text("gamma = -1\nn = 17\nr = 6\ntrials = 20\n")
    codes = [main(["verify", "--config", str(cfg), "--seed", "11", "--out", str(tmp_path / d)]) for d in "ab"]
    a, b = ((tmp_path / d / "oracles.jsonl").read_bytes() for d in "ab")
    ok = a == b and len(a) > 0 and codes == [0, 0]
    assert _report(record_property, 10, ok, f"{len(a.splitlines())} lines, identical = {a == b}, exit codes {codes}")
