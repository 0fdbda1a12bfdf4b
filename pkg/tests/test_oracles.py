import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lfd.admissible import discrete_equilibrium, perturbed_equilibrium, random_bumps
from lfd.checkpoint import read_checkpoint
from lfd.distribution import Distribution
from lfd.equilibrium import epsilon_sat, evaluate_equilibrium, saturated_state, solve_fermi_dirac
from lfd.errors import NormalizationViolated, ParameterOutOfRange, Saturated
from lfd.grid import build_grid
from lfd import oracles
from lfd.oracles import (Verdict, check_convolution_bound, check_csiszar_kullback, check_D_upper_bound,
                         check_dissipation_interpolation, check_entropy_production_lower_bound,
                         check_exp_interpolation, check_jensen_bound, check_Js1_sign,
                         check_level_set_domination, convolution_constant, make_generator, run_suite)


def _eq(eps):
    return solve_fermi_dirac(1.0, (0, 0, 0), 1.0, eps)


def _perturbed(grid, eps, seed=0, amplitude=0.2):
    return perturbed_equilibrium(np.random.default_rng(seed), grid, _eq(eps), amplitude)


# Csiszar-Kullback ------------------------------------------------------------

def test_ck_at_equilibrium(grid17):
    M = discrete_equilibrium(grid17, 0.05)
    v = check_csiszar_kullback(M, M)
    assert v.passed and v.lhs == 0.0


@pytest.mark.parametrize("eps", [0.0, 0.05, 0.2])
def test_ck_random_perturbations(grid17, eps):
    for seed in range(20):
        assert check_csiszar_kullback(_perturbed(grid17, eps, seed)).passed


def test_ck_near_saturation(grid17):
    eps = 0.9 * epsilon_sat(1.0, 1.0)
    for seed in range(5):
        v = check_csiszar_kullback(_perturbed(grid17, eps, seed, 0.1))
        assert v.passed


# Jensen ----------------------------------------------------------------------

def test_jensen_equilibrium_at_origin(grid17):
    M = evaluate_equilibrium(_eq(0.05), grid17)
    v = check_jensen_bound(M, np.zeros((1, 3)), -1.0)
    assert v.passed and v.lhs >= v.rhs


def test_jensen_saturated_degenerate():
    eps = 10.0
    f = saturated_state(1.0, (0, 0, 0), eps, build_grid(2.0, 17))
    v = check_jensen_bound(f, np.zeros((1, 3)), -1.0)
    assert v.passed and v.vacuous and v.rhs == 0.0


def test_jensen_random(grid17):
    rng = np.random.default_rng(3)
    for _ in range(20):
        f = random_bumps(rng, grid17, float(rng.choice([0.0, 0.05, 0.2])))
        pts = rng.uniform(-6, 6, size=(20, 3))
        assert check_jensen_bound(f, pts, float(rng.uniform(-2, 0))).passed


def test_jensen_normalization_violated(grid17):
    M = evaluate_equilibrium(_eq(0.0), grid17)
    with pytest.raises(NormalizationViolated):
        check_jensen_bound(M.with_values(2 * M.values), np.zeros((1, 3)), -1.0)


# convolution bound -------------------------------------------------------------

def test_convolution_constant_closed_form():
    assert convolution_constant(-1.0, 2.0) == pytest.approx(2.0 * math.sqrt(4.0 * math.pi), rel=1e-15)


def test_convolution_lambda_zero_equality(grid9, rng):
    g = rng.random(grid9.shape)
    phi = rng.random(grid9.shape)
    v = check_convolution_bound(grid9, g, phi, 0.0, 2.0)
    assert v.passed
    assert v.lhs == pytest.approx(v.rhs, rel=1e-12)


def test_convolution_random_pairs(grid17):
    rng = np.random.default_rng(11)
    for _ in range(50):
        g = random_bumps(rng, grid17, 0.0).values
        phi = random_bumps(rng, grid17, 0.05).values
        assert check_convolution_bound(grid17, g, phi, -1.5, 3.0).passed


@pytest.mark.parametrize("lam,p", [(-2.5, 2.0), (2.5, 2.0), (-1.5, 2.0), (-1.0, 1.0)])
def test_convolution_parameter_range(grid9, lam, p):
    z = np.ones(grid9.shape)
    with pytest.raises(ParameterOutOfRange):
        check_convolution_bound(grid9, z, z, lam, p)


# dissipation interpolation -------------------------------------------------------

def test_interpolation_perturbed(grid17):
    v = check_dissipation_interpolation(_perturbed(grid17, 0.05), -1.0, 2.0)
    assert v.passed and not v.vacuous


def test_interpolation_equality_single_pair_distance():
    # two active nodes: Xi lives on a single pair distance, so Hoelder is an equality
    g = build_grid(2.0, 9)
    values = np.zeros(g.shape)
    values[4, 4, 4] = 0.3
    values[5, 4, 4] = 0.1
    values[4, 5, 4] = 0.2
    f = Distribution(g, values)
    v = check_dissipation_interpolation(f, -1.0, 2.0)
    assert v.passed


def test_interpolation_vacuous_at_equilibrium(grid9):
    f = Distribution(grid9, np.zeros(grid9.shape))
    v = check_dissipation_interpolation(f, -1.0, 1.0)
    assert v.passed and v.vacuous


@given(st.integers(0, 10 ** 6), st.sampled_from([-0.5, -1.0, -1.5]), st.sampled_from([1.0, 2.0]))
def test_interpolation_property(seed, gamma, eta):
    f = random_bumps(np.random.default_rng(seed), build_grid(4.0, 9), 0.05)
    assert check_dissipation_interpolation(f, gamma, eta).passed


# D upper bound -------------------------------------------------------------------

def test_D_upper_zero():
    g = build_grid(2.0, 9)
    v = check_D_upper_bound(Distribution(g, np.zeros(g.shape)), 0.0)
    assert v.passed and v.lhs == 0.0 and v.rhs == 0.0


def test_D_upper_equilibrium(grid17):
    assert check_D_upper_bound(evaluate_equilibrium(_eq(0.05), grid17), 0.0).passed


def test_D_upper_rough(grid17):
    f = random_bumps(np.random.default_rng(5), grid17, 0.2, roughness=0.05)
    assert check_D_upper_bound(f, 1.0).passed


def test_D_upper_saturated():
    f = saturated_state(1.0, (0, 0, 0), 10.0, build_grid(2.0, 17))
    with pytest.raises(Saturated):
        check_D_upper_bound(f, 0.0)


# exponential interpolation -----------------------------------------------------

def test_exp_interpolation_perturbed(grid17):
    v = check_exp_interpolation(_perturbed(grid17, 0.05), -1.0, 0.1, 0.3)
    assert v.passed and not v.vacuous
    assert v.details["ratio"] >= 2.0


def test_exp_interpolation_vacuous(grid9):
    v = check_exp_interpolation(Distribution(grid9, np.zeros(grid9.shape)), -1.0, 0.1, 0.3)
    assert v.passed and v.vacuous


# level sets ------------------------------------------------------------------

def test_level_set_alpha_zero(grid17, rng):
    assert check_level_set_domination(random_bumps(rng, grid17, 0.05), 0.0, 0.01, 0.0).passed


def test_level_set_above_max(grid17, rng):
    f = random_bumps(rng, grid17, 0.05)
    v = check_level_set_domination(f, 0.0, 2 * float(f.values.max()), 1.0)
    assert v.passed and v.lhs == 0.0


def test_level_set_random(rng):
    g = build_grid(3.0, 17)
    for _ in range(10):
        values = rng.random(g.shape) * 0.5
        assert check_level_set_domination(Distribution(g, values), 0.1, 0.3, 2.0).passed


def test_level_set_parameter_range(grid9):
    with pytest.raises(ParameterOutOfRange):
        check_level_set_domination(Distribution(grid9, np.zeros(grid9.shape)), 0.3, 0.1, 1.0)


# J_{s,1} -------------------------------------------------------------------

def test_js1_single_shell_near_zero():
    g = build_grid(2.0, 17)
    values = np.where(np.abs(np.sqrt(g.speed_sq) - 1.0) < 1e-9, 1.0, 0.0)
    assert values.sum() > 0
    v = check_Js1_sign(Distribution(g, values), 3.0, -1.0)
    assert v.passed
    assert abs(v.lhs) <= 1e-12


def test_js1_equilibrium(grid17):
    v = check_Js1_sign(evaluate_equilibrium(_eq(0.05), grid17), 3.0, -1.0)
    assert v.passed and v.lhs <= 0


def test_js1_random(grid17, rng):
    assert check_Js1_sign(random_bumps(rng, grid17, 0.05), 4.0, -1.5).passed


# entropy production lower bound -------------------------------------------------

def test_lower_bound_equilibrium(grid17):
    M = discrete_equilibrium(grid17, 0.02)
    v = check_entropy_production_lower_bound(M, 1.0)
    assert v.passed
    assert abs(v.rhs) <= 1e-10


def test_lower_bound_perturbed(grid17):
    v = check_entropy_production_lower_bound(_perturbed(grid17, 0.02), 1.0)
    assert v.passed and not v.vacuous


def test_lower_bound_vacuous_bracket(grid17):
    v = check_entropy_production_lower_bound(_perturbed(grid17, 5.0, amplitude=0.1), 1.0)
    assert v.passed and v.vacuous and v.details["bracket"] <= 0


def test_lower_bound_normalization(grid17):
    f = _perturbed(grid17, 0.02)
    with pytest.raises(NormalizationViolated):
        check_entropy_production_lower_bound(f.with_values(1.1 * f.values), 1.0)


# suite -----------------------------------------------------------------------

def test_verdict_json_keys():
    rec = json.loads(Verdict("x", True, 1.0, 2.0, 0.0).to_json(seed=3, trial=4))
    assert list(rec) == ["oracle", "seed", "trial", "verdict", "lhs", "rhs", "slack", "vacuous"]


def test_generator_streams_are_deterministic_and_distinct():
    a = make_generator(42, 1, 2).random(4)
    assert np.array_equal(a, make_generator(42, 1, 2).random(4))
    assert not np.array_equal(a, make_generator(42, 1, 3).random(4))


def test_suite_small_run_passes(tmp_path):
    report = tmp_path / "r.jsonl"
    summary = run_suite(7, trials=3, grid=build_grid(5.0, 11), report_path=report)
    assert set(summary) == set(oracles.ORACLES)
    assert all(c["failed"] == 0 for c in summary.values())
    lines = report.read_text().splitlines()
    assert len(lines) == 3 * len(oracles.ORACLES)


def test_failing_trial_dumps_reproducer(tmp_path, monkeypatch):
    def failing(rng, grid):
        f = random_bumps(rng, grid, 0.05)
        return Verdict("always_fails", False, 1.0, 0.0, 0.0), f, {"gamma": -1.0}

    monkeypatch.setitem(oracles.ORACLES, "always_fails", failing)
    summary = run_suite(1, trials=1, grid=build_grid(4.0, 9), oracles=["always_fails"],
                        reproducer_dir=tmp_path)
    assert summary["always_fails"]["failed"] == 1
    ck = read_checkpoint(tmp_path / "always_fails-0000.lfd")
    assert ck.distribution.grid.n == 9
    meta = json.loads((tmp_path / "always_fails-0000.json").read_text())
    assert meta["verdict"]["passed"] is False
