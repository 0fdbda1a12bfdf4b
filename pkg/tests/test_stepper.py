import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lfd.admissible import random_bumps, two_bump
from lfd.distribution import Distribution
from lfd.equilibrium import evaluate_equilibrium, solve_fermi_dirac
from lfd.errors import BoundViolation
from lfd.grid import build_grid, integrate
from lfd.kernels import KernelParams
from lfd.stepper import (SimulationState, assemble_Q, corner_fields, one_sided_difference,
                         one_sided_difference_T, rhs, stable_dt, step)


def _state(f, gamma=-1.0, nu=0.05, **kw):
    return SimulationState(0.0, f, KernelParams(gamma, nu), **kw)


def _collision_Q(f, gamma=-1.0, nu=0.05):
    p = KernelParams(gamma, nu)
    return assemble_Q(f, corner_fields(f, p), nu, viscosity=False)


def test_zero_state_has_zero_rhs(grid9):
    f = Distribution(grid9, np.zeros(grid9.shape))
    Q, _ = rhs(_state(f), f)
    assert np.all(Q == 0)


@pytest.mark.parametrize("tau", [1, -1])
@pytest.mark.parametrize("axis", [0, 1, 2])
def test_transpose_is_exact_adjoint(tau, axis, rng):
    u = rng.standard_normal((9, 9, 9))
    y = rng.standard_normal((9, 9, 9))
    lhs = np.sum(one_sided_difference(u, axis, tau, 0.5) * y)
    rhs_ = np.sum(u * one_sided_difference_T(y, axis, tau, 0.5))
    assert lhs == pytest.approx(rhs_, rel=1e-13, abs=1e-12)


@pytest.mark.parametrize("tau", [1, -1])
def test_one_sided_difference_exact_on_quadratics(tau):
    g = build_grid(3.0, 9)
    x = g.coord_field(0)
    d = one_sided_difference(x * x, 0, tau, g.h)
    np.testing.assert_allclose(d, 2 * x + tau * g.h, atol=1e-12)
    np.testing.assert_allclose(one_sided_difference(np.ones(g.shape), 0, tau, g.h), 0.0, atol=0)


def test_mass_telescopes(grid17, rng):
    for eps in (0.0, 0.2):
        f = random_bumps(rng, grid17, eps)
        Q, _ = rhs(_state(f), f)
        assert abs(integrate(grid17, Q)) <= 1e-13 * integrate(grid17, np.abs(Q))


@given(st.integers(0, 2 ** 31 - 1), st.sampled_from([0.0, 0.05, 0.2]), st.sampled_from([-0.5, -1.0, -1.5]))
def test_collision_part_conserves_and_dissipates(seed, eps, gamma):
    g = build_grid(6.0, 12)
    f = random_bumps(np.random.default_rng(seed), g, eps)
    Q = _collision_Q(f, gamma)
    scale = integrate(g, np.abs(Q) * (1 + g.speed_sq))
    for i in range(3):
        assert abs(integrate(g, Q * g.coord_field(i))) <= 1e-12 * scale
    assert abs(integrate(g, Q * g.speed_sq)) <= 1e-12 * scale
    # semi-discrete entropy production is nonnegative
    assert -integrate(g, f.logit() * Q) >= -1e-12 * scale


@pytest.mark.parametrize("eps", [0.0, 0.05, 0.2])
def test_equilibrium_annihilated(grid17, eps):
    M = evaluate_equilibrium(solve_fermi_dirac(1.0, (0.3, 0, -0.2), 1.0, eps), grid17)
    Q = _collision_Q(M)
    assert np.max(np.abs(Q)) <= 1e-12 * M.values.max()


def test_empty_interior_node_receives_no_collisional_change(grid17, rng):
    f = random_bumps(rng, grid17, 0.05)
    values = f.values.copy()
    idx = (8, 9, 7)
    values[idx] = 0.0
    Q = _collision_Q(f.with_values(values))
    assert Q[idx] == 0.0


def test_stable_dt_zero_state():
    g = build_grid(4.0, 17)
    assert g.h == 0.5
    f = Distribution(g, np.zeros(g.shape))
    cfl = 0.4
    dt = stable_dt(_state(f, nu=0.01), corner_fields(f, KernelParams(-1.0, 0.01)), cfl)
    assert dt == pytest.approx(cfl * 0.25 / 0.06, rel=1e-14)


def test_stable_dt_scalings():
    coarse = build_grid(4.0, 17)
    fine = build_grid(4.0, 33)
    f_c = Distribution(coarse, np.zeros(coarse.shape))
    f_f = Distribution(fine, np.zeros(fine.shape))
    dt_c = stable_dt(_state(f_c, nu=0.01), None, 0.4)
    dt_f = stable_dt(_state(f_f, nu=0.01), None, 0.4)
    assert dt_f == pytest.approx(dt_c / 4, rel=1e-14)
    assert stable_dt(_state(f_c, nu=0.02), None, 0.4) == pytest.approx(dt_c / 2, rel=1e-14)


def test_stable_dt_rejects_bad_cfl(grid9):
    f = Distribution(grid9, np.zeros(grid9.shape))
    with pytest.raises(ValueError):
        stable_dt(_state(f), None, 0.0)


def test_dt_zero_leaves_state(grid9, rng):
    st_ = _state(random_bumps(rng, grid9, 0.05))
    assert step(st_, 0.0) is st_


def test_equilibrium_step_drift_bounded_by_residual(grid17):
    M = evaluate_equilibrium(solve_fermi_dirac(1.0, (0, 0, 0), 1.0, 0.05), grid17)
    st_ = _state(M, nu=0.05)
    fields = corner_fields(M, st_.params)
    dt = stable_dt(st_, fields, 0.4)
    Q = assemble_Q(M, fields, 0.05)
    new = step(st_, dt, "rk2", fields)
    assert np.max(np.abs(new.f.values - M.values)) <= 2.0 * dt * np.max(np.abs(Q))


@pytest.mark.parametrize("scheme", ["euler", "rk2"])
def test_step_conserves_mass(grid17, scheme):
    f = two_bump(grid17, 0.05)
    st_ = _state(f, nu=grid17.h)
    new = step(st_, stable_dt(st_, corner_fields(f, st_.params), 0.4), scheme)
    assert abs(new.f.mass() - f.mass()) <= 1e-12 * f.mass()
    assert new.step_count == 1 and new.t > 0


def test_unknown_scheme(grid9, rng):
    with pytest.raises(ValueError):
        step(_state(random_bumps(rng, grid9, 0.0)), 0.1, "rk4")


def test_oversized_step_raises_bound_violation(grid17):
    f = two_bump(grid17, 0.2)
    st_ = _state(f, nu=grid17.h)
    dt = stable_dt(st_, corner_fields(f, st_.params), 0.4)
    with pytest.raises(BoundViolation) as err:
        step(st_, 200 * dt, "euler")
    assert err.value.fmin < 0 or err.value.fmax > 5.0


def test_clipping_logs_and_tracks_mass(grid17, caplog):
    f = two_bump(grid17, 0.2)
    st_ = _state(f, nu=grid17.h, clip=True)
    dt = stable_dt(st_, corner_fields(f, st_.params), 0.4)
    with caplog.at_level(logging.INFO, logger="lfd.stepper"):
        new = step(st_, 200 * dt, "euler")
    assert new.clipped_mass > 0
    assert new.f.values.min() >= 0 and new.f.values.max() <= 5.0
    assert "clipped mass" in caplog.text
