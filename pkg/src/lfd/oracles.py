"""Checks of inequalities with explicit constants, evaluated on grid functions.

Every check returns a :class:`Verdict` carrying both sides, the slack that
was allowed and whether the inequality was vacuous for the input. Both sides
are computed with the same quadrature and floor policy, so the inequalities
hold exactly on the grid and the slack only has to absorb round-off.

:func:`run_suite` draws seeded random inputs, runs every check and writes a
JSON-lines report; failing inputs are saved as reproducers.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .admissible import discrete_equilibrium, perturbed_equilibrium, random_bumps
from .checkpoint import write_checkpoint
from .diagnostics import (FLOOR, _pair_form, _projector_tabulator, entropy_production, entropy_S,
                          level_set_part, singular_convolution, theorem51_constants, weighted_fisher,
                          EXP_LIMIT, _max_offset)
from .distribution import Distribution
from .equilibrium import epsilon_sat, solve_fermi_dirac
from .errors import NormalizationViolated, ParameterOutOfRange, Saturated, WeightOverflow
from .grid import VelocityGrid, build_grid, integrate, weight_field

__all__ = [
    "Verdict",
    "REL_SLACK",
    "check_csiszar_kullback",
    "check_jensen_bound",
    "check_convolution_bound",
    "convolution_constant",
    "check_dissipation_interpolation",
    "check_D_upper_bound",
    "check_exp_interpolation",
    "check_level_set_domination",
    "check_Js1_sign",
    "check_entropy_production_lower_bound",
    "ORACLES",
    "make_generator",
    "run_suite",
]

REL_SLACK = 1e-8
# round-off allowance, in units of the magnitudes that were subtracted
ROUNDOFF = 64 * np.finfo(float).eps
NORMALIZATION_TOL = 1e-8


@dataclass
class Verdict:
    oracle: str
    passed: bool
    lhs: float
    rhs: float
    slack: float
    vacuous: bool = False
    details: dict = field(default_factory=dict)

    def to_json(self, **extra) -> str:
        rec = {"oracle": self.oracle, **extra, "verdict": "pass" if self.passed else "fail",
               "lhs": float(self.lhs), "rhs": float(self.rhs), "slack": float(self.slack),
               "vacuous": bool(self.vacuous)}
        return json.dumps(rec, sort_keys=False)


def _at_most(lhs: float, rhs: float, slack: float) -> bool:
    return bool(lhs <= rhs + slack)


def _moments_of(f: Distribution):
    rho = f.mass()
    if rho <= 0:
        raise NormalizationViolated("distribution has no mass")
    u = f.momentum() / rho
    theta = (f.energy() / rho - float(u @ u)) / 3.0
    return rho, u, theta


def _check_normalized(f: Distribution, tol: float = NORMALIZATION_TOL) -> None:
    rho, u, _ = _moments_of(f)
    energy = f.energy()
    if abs(rho - 1.0) > tol or np.max(np.abs(u)) > tol or abs(energy - 3.0) > 3.0 * tol:
        raise NormalizationViolated(
            f"moments (mass {rho:.12g}, momentum {u.tolist()}, energy {energy:.12g}) are not (1, 0, 3)")


def _reference_state(f: Distribution) -> Distribution:
    rho, u, theta = _moments_of(f)
    return discrete_equilibrium(f.grid, f.epsilon, rho, u, theta)


# ---------------------------------------------------------------------------


def check_csiszar_kullback(f: Distribution, reference: Distribution | None = None) -> Verdict:
    """``||f - M||_1^2 <= 2 (int f) H(f | M)`` against the grid equilibrium ``M`` with the moments of ``f``."""
    M = _reference_state(f) if reference is None else reference
    rho = f.mass()
    diff = integrate(f.grid, np.abs(f.values - M.values))
    s_f, s_m = entropy_S(f), entropy_S(M)
    lhs = diff * diff
    rhs = 2.0 * rho * (s_m - s_f)
    slack = REL_SLACK * abs(rhs) + ROUNDOFF * 2.0 * rho * (abs(s_f) + abs(s_m))
    return Verdict("csiszar_kullback", _at_most(lhs, rhs, slack), lhs, rhs, slack,
                   details={"l1_distance": diff})


def check_jensen_bound(f: Distribution, v_sample, gamma: float) -> Verdict:
    """``int (1 + |v - w|^2)^{gamma/2} F(w) dw >= 12^{gamma/2} rho_F^{1 - gamma/2} <v>^gamma`` at sampled ``v``.

    ``v_sample`` has shape (k, 3). The reported sides belong to the sample
    with the smallest ratio of left to right side.

    Raises
    ------
    NormalizationViolated
        If ``rho_F > 1`` or ``int F |v|^2 > 3``, the two facts the bound rests on.
    """
    grid = f.grid
    F = f.F()
    rho_F = integrate(grid, F)
    if rho_F > 1.0 + NORMALIZATION_TOL:
        raise NormalizationViolated(f"rho_F = {rho_F:.12g} > 1")
    if integrate(grid, F * grid.speed_sq) > 3.0 * (1.0 + NORMALIZATION_TOL):
        raise NormalizationViolated("second moment of F exceeds 3")
    pts = np.atleast_2d(np.asarray(v_sample, dtype=float))
    nodes = np.stack([grid.coord_field(i).ravel() for i in range(3)], axis=1)
    dens = (F * grid.weights).ravel()
    lhs = np.empty(len(pts))
    for k, v in enumerate(pts):
        r2 = np.sum((nodes - v) ** 2, axis=1)
        lhs[k] = float(np.sum((1.0 + r2) ** (0.5 * gamma) * dens))
    rhs = 12.0 ** (0.5 * gamma) * max(rho_F, 0.0) ** (1.0 - 0.5 * gamma) * (1.0 + np.sum(pts ** 2, axis=1)) ** (0.5 * gamma)
    slack = REL_SLACK * rhs
    if rho_F <= 0:
        return Verdict("jensen_bound", bool(np.all(lhs >= -slack)), float(lhs.min()), 0.0, 0.0, vacuous=True)
    worst = int(np.argmin(lhs / rhs))
    passed = bool(np.all(lhs >= rhs - slack))
    return Verdict("jensen_bound", passed, float(lhs[worst]), float(rhs[worst]), float(slack[worst]),
                   details={"rho_F": rho_F, "samples": len(pts)})


def convolution_constant(lam: float, p: float) -> float:
    """``2^-lam max(1, (4 pi / (3 + lam q))^(1/q))``, ``1/p + 1/q = 1``."""
    q = p / (p - 1.0)
    return 2.0 ** (-lam) * max(1.0, (4.0 * math.pi / (3.0 + lam * q)) ** (1.0 / q))


def check_convolution_bound(grid: VelocityGrid, g: np.ndarray, phi: np.ndarray, lam: float, p: float) -> Verdict:
    """``|int (|.|^lam * g) phi|`` against its weighted-norm bound.

    For ``lam < 0`` the bound is ``C_p(lam) ||<.>^-lam g||_1 (||<.>^lam phi||_1 + ||<.>^lam phi||_p)``;
    for ``lam >= 0`` it is ``||<.>^lam g||_1 ||<.>^lam phi||_1``. The singular
    self term is dropped for ``lam < 0``.

    Raises
    ------
    ParameterOutOfRange
        Unless ``lam`` lies in (-2, 2], ``p > 1`` and ``-lam q < 3``.
    """
    if not (-2.0 < lam <= 2.0):
        raise ParameterOutOfRange(f"lambda must lie in (-2, 2], got {lam}")
    if not (p > 1.0):
        raise ParameterOutOfRange(f"p must exceed 1, got {p}")
    q = p / (p - 1.0)
    if -lam * q >= 3.0:
        raise ParameterOutOfRange(f"-lambda q = {-lam * q:.3g} must be below 3")
    g = np.asarray(g, dtype=float)
    phi = np.asarray(phi, dtype=float)
    grid.check_field(g)
    grid.check_field(phi)
    if g.min() < 0 or phi.min() < 0:
        raise ParameterOutOfRange("g and phi must be nonnegative")
    conv = singular_convolution(grid, g, lam)
    lhs = abs(integrate(grid, conv * phi))
    if lam < 0:
        weighted_phi = weight_field(grid, lam) * phi
        l1 = integrate(grid, weighted_phi)
        lp = integrate(grid, weighted_phi ** p) ** (1.0 / p)
        const = convolution_constant(lam, p)
        rhs = const * integrate(grid, weight_field(grid, -lam) * g) * (l1 + lp)
    else:
        const = 1.0
        rhs = integrate(grid, weight_field(grid, lam) * g) * integrate(grid, weight_field(grid, lam) * phi)
    slack = REL_SLACK * rhs
    return Verdict("convolution_bound", _at_most(lhs, rhs, slack), lhs, rhs, slack,
                   details={"constant": const})


def check_dissipation_interpolation(f: Distribution, gamma: float, eta: float) -> Verdict:
    """``D^(gamma) >= (D^(0))^(1 - gamma/eta) (D^(eta))^(gamma/eta)`` for ``gamma < 0 < eta``."""
    if not (eta > 0):
        raise ParameterOutOfRange(f"eta must be positive, got {eta}")
    if not (gamma < 0):
        raise ParameterOutOfRange(f"gamma must be negative, got {gamma}")
    d_g = entropy_production(f, gamma)
    d_0 = entropy_production(f, 0.0)
    d_e = entropy_production(f, eta)
    if d_0 <= FLOOR or d_e <= 0:
        return Verdict("dissipation_interpolation", True, d_g, 0.0, 0.0, vacuous=True,
                       details={"D0": d_0, "D_eta": d_e})
    rhs = d_0 ** (1.0 - gamma / eta) * d_e ** (gamma / eta)
    slack = REL_SLACK * rhs
    return Verdict("dissipation_interpolation", bool(d_g >= rhs - slack), d_g, rhs, slack,
                   details={"D0": d_0, "D_eta": d_e})


def check_D_upper_bound(f: Distribution, eta: float) -> Verdict:
    """``D^(eta) <= 2^((eta+8)/2) / kappa0 ||f||_{L^1_{eta+2}} int <v>^(eta+2) |grad sqrt f|^2``.

    Raises
    ------
    Saturated
        If ``kappa0 <= 0``.
    """
    if eta < -2:
        raise ParameterOutOfRange(f"eta must be >= -2, got {eta}")
    k0 = f.kappa0()
    if k0 <= 0:
        raise Saturated(f"kappa0 = {k0:.3e}")
    lhs = entropy_production(f, eta)
    norm = integrate(f.grid, np.abs(f.values) * weight_field(f.grid, eta + 2.0))
    fisher = weighted_fisher(f, eta + 2.0)
    rhs = 2.0 ** (0.5 * (eta + 8.0)) / k0 * norm * fisher
    slack = REL_SLACK * rhs
    return Verdict("D_upper_bound", _at_most(lhs, rhs, slack), lhs, rhs, slack,
                   vacuous=bool(rhs == 0.0), details={"kappa0": k0})


def check_exp_interpolation(f: Distribution, gamma: float, a: float, q: float) -> Verdict:
    """``D^(gamma) >= (1/2) [(1/a) log(Gamma / D^(0))]^(gamma/q) D^(0)``.

    ``Gamma`` is the full pair sum of ``|z|^2 exp(a |z|^q) Xi``; the
    ratio ``Gamma / D^(0)`` is at least 2 and is reported in ``details``.
    """
    if not (a > 0) or not (0 < q < 1):
        raise ParameterOutOfRange(f"need a > 0 and q in (0, 1), got a={a}, q={q}")
    if not (gamma < 0):
        raise ParameterOutOfRange(f"gamma must be negative, got {gamma}")
    if a * _max_offset(f.grid) ** q > EXP_LIMIT:
        raise WeightOverflow(f"a |z|^q reaches {a * _max_offset(f.grid) ** q:.1f} on the grid")
    d_g = entropy_production(f, gamma)
    d_0 = entropy_production(f, 0.0)
    tab = _projector_tabulator(lambda r: r * r * np.exp(a * r ** q))
    big = 2.0 * _pair_form(f, ("pair-exp", float(a), float(q)), tab, "fft")
    if d_0 <= FLOOR:
        return Verdict("exp_interpolation", True, d_g, 0.0, 0.0, vacuous=True,
                       details={"D0": d_0, "Gamma": big})
    ratio = big / d_0
    rhs = 0.5 * (math.log(ratio) / a) ** (gamma / q) * d_0
    slack = REL_SLACK * rhs
    return Verdict("exp_interpolation", bool(d_g >= rhs - slack), d_g, rhs, slack,
                   details={"D0": d_0, "Gamma": big, "ratio": ratio})


def check_level_set_domination(f: Distribution, k: float, level: float, alpha: float) -> Verdict:
    """Nodewise ``(f - l)_+ <= (l - k)^-alpha (f - k)_+^(1 + alpha)`` for ``0 <= k < l``.

    The reported sides are taken at the node with the largest ratio.
    """
    if not (0 <= k < level) or alpha < 0:
        raise ParameterOutOfRange(f"need 0 <= k < l and alpha >= 0, got k={k}, l={level}, alpha={alpha}")
    upper = level_set_part(f, level)
    lower = (level - k) ** (-alpha) * level_set_part(f, k) ** (1.0 + alpha)
    slack = ROUNDOFF * np.maximum(np.abs(f.values), 1.0) * np.maximum(1.0, lower)
    passed = bool(np.all(upper <= lower + slack))
    active = upper > 0
    if not active.any():
        return Verdict("level_set_domination", passed, 0.0, float(lower.max()), 0.0)
    ratio = np.where(active, upper / np.where(lower > 0, lower, np.inf), 0.0)
    idx = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    return Verdict("level_set_domination", passed, float(upper[idx]), float(lower[idx]), float(slack[idx]))


def _js_parts(f: Distribution, s: float, gamma: float):
    grid = f.grid
    g = f.values
    jap2 = 1.0 + grid.speed_sq
    outer = 2.0 * s * g * weight_field(grid, s - 2.0)
    a = singular_convolution(grid, g * jap2, gamma)
    b = jap2 * singular_convolution(grid, g, gamma)
    return integrate(grid, outer * a), integrate(grid, outer * b)


def check_Js1_sign(f: Distribution, s: float, gamma: float) -> Verdict:
    """``J_{s,1}(f, f) = 2s sum f f* |v - v*|^gamma <v>^(s-2) (<v*>^2 - <v>^2) <= 0`` for ``s > 2``."""
    if not (s > 2):
        raise ParameterOutOfRange(f"s must exceed 2, got {s}")
    plus, minus = _js_parts(f, s, gamma)
    value = plus - minus
    slack = REL_SLACK * (abs(plus) + abs(minus))
    return Verdict("Js1_sign", _at_most(value, 0.0, slack), value, 0.0, slack)


def check_entropy_production_lower_bound(f: Distribution, eta: float, reference: Distribution | None = None) -> Verdict:
    """``D^(eta) >= 2 lambda_eta [b_eps - 12 eps^2 / kappa0^4 max(||f||^2, ||M||^2)] H(f | M)``.

    ``f`` must carry the moments (1, 0, 3). ``b_eps`` comes from the
    equilibrium solve; ``H`` is taken against the grid equilibrium.

    Raises
    ------
    NormalizationViolated, Saturated
    """
    if eta < 0:
        raise ParameterOutOfRange(f"eta must be >= 0, got {eta}")
    _check_normalized(f)
    k0 = f.kappa0()
    if k0 <= 0:
        raise Saturated(f"kappa0 = {k0:.3e}")
    eq = solve_fermi_dirac(1.0, (0.0, 0.0, 0.0), 1.0, f.epsilon)
    M = discrete_equilibrium(f.grid, f.epsilon) if reference is None else reference
    consts = theorem51_constants(f, eta)
    sup = max(float(f.values.max()), eq.peak, float(M.values.max()))
    bracket = eq.b_eps - 12.0 * f.epsilon ** 2 / k0 ** 4 * sup * sup
    lhs = entropy_production(f, eta)
    s_f, s_m = entropy_S(f), entropy_S(M)
    H = s_m - s_f
    details = {"lambda_eta": consts.lambda_eta, "bracket": bracket, "H_rel": H}
    if bracket <= 0:
        return Verdict("entropy_production_lower_bound", True, lhs, 2.0 * consts.lambda_eta * bracket * H,
                       0.0, vacuous=True, details=details)
    rhs = 2.0 * consts.lambda_eta * bracket * H
    slack = REL_SLACK * abs(rhs) + ROUNDOFF * 2.0 * consts.lambda_eta * bracket * (abs(s_f) + abs(s_m))
    return Verdict("entropy_production_lower_bound", bool(lhs >= rhs - slack), lhs, rhs, slack,
                   vacuous=bool(H <= 0), details=details)


# ---------------------------------------------------------------------------
# randomized suite


def make_generator(seed: int, *keys: int) -> np.random.Generator:
    """Independent stream for ``(seed, *keys)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


EPS_CHOICES = (0.0, 0.05, 0.2)
GAMMA_CHOICES = (-0.5, -1.0, -1.5)


def _random_state(rng: np.random.Generator, grid: VelocityGrid, epsilon: float) -> Distribution:
    if rng.random() < 0.5:
        return random_bumps(rng, grid, epsilon, roughness=float(rng.choice([0.0, 0.05])))
    eq = solve_fermi_dirac(1.0, (0.0, 0.0, 0.0), 1.0, epsilon)
    return perturbed_equilibrium(rng, grid, eq, amplitude=float(rng.uniform(0.05, 0.4)),
                                 smooth=bool(rng.random() < 0.8))


def _trial_csiszar_kullback(rng, grid):
    eps = float(rng.choice(EPS_CHOICES + (0.9 * epsilon_sat(1.0, 1.0),)))
    f = _random_state(rng, grid, eps)
    return check_csiszar_kullback(f), f, {"epsilon": eps}


def _trial_jensen(rng, grid):
    eps = float(rng.choice(EPS_CHOICES))
    gamma = float(rng.uniform(-2.0, 0.0))
    f = _random_state(rng, grid, eps)
    pts = rng.uniform(-grid.extent, grid.extent, size=(20, 3))
    return check_jensen_bound(f, pts, gamma), f, {"epsilon": eps, "gamma": gamma}


def _trial_convolution(rng, grid):
    lam, p = [(-1.5, 3.0), (-1.0, 2.0), (-0.5, 1.5), (0.5, 2.0)][int(rng.integers(4))]
    g = _random_state(rng, grid, 0.0).values
    phi = _random_state(rng, grid, float(rng.choice(EPS_CHOICES))).values * rng.uniform(0.5, 2.0)
    f = Distribution(grid, g, 0.0)
    return check_convolution_bound(grid, g, phi, lam, p), f, {"lambda": lam, "p": p, "phi_sum": float(phi.sum())}


def _trial_interpolation(rng, grid):
    eps = float(rng.choice(EPS_CHOICES))
    gamma = float(rng.choice(GAMMA_CHOICES))
    eta = float(rng.choice([1.0, 2.0]))
    f = _random_state(rng, grid, eps)
    return check_dissipation_interpolation(f, gamma, eta), f, {"epsilon": eps, "gamma": gamma, "eta": eta}


def _trial_D_upper(rng, grid):
    eps = float(rng.choice(EPS_CHOICES))
    eta = float(rng.choice([-1.5, -1.0, 0.0, 1.0, 2.0]))
    f = _random_state(rng, grid, eps)
    return check_D_upper_bound(f, eta), f, {"epsilon": eps, "eta": eta}


def _trial_exp(rng, grid):
    eps = float(rng.choice(EPS_CHOICES))
    gamma = float(rng.choice(GAMMA_CHOICES))
    a = float(rng.uniform(0.05, 0.5))
    q = float(rng.uniform(0.1, 0.9))
    f = _random_state(rng, grid, eps)
    return check_exp_interpolation(f, gamma, a, q), f, {"epsilon": eps, "gamma": gamma, "a": a, "q": q}


def _trial_level_set(rng, grid):
    eps = float(rng.choice(EPS_CHOICES))
    f = _random_state(rng, grid, eps)
    top = float(f.values.max())
    k = float(rng.uniform(0.0, 0.6 * top))
    level = float(rng.uniform(k, top)) + 1e-12
    alpha = float(rng.uniform(0.0, 3.0))
    return check_level_set_domination(f, k, level, alpha), f, {"k": k, "level": level, "alpha": alpha}


def _trial_js1(rng, grid):
    eps = float(rng.choice(EPS_CHOICES))
    s = float(rng.choice([2.5, 3.0, 4.0, 6.0]))
    gamma = float(rng.choice(GAMMA_CHOICES))
    f = _random_state(rng, grid, eps)
    return check_Js1_sign(f, s, gamma), f, {"epsilon": eps, "s": s, "gamma": gamma}


def _trial_lower_bound(rng, grid):
    eps = float(rng.choice([0.0, 0.01, 0.02, 0.05]))
    eta = float(rng.choice([0.0, 1.0, 2.0]))
    eq = solve_fermi_dirac(1.0, (0.0, 0.0, 0.0), 1.0, eps)
    f = perturbed_equilibrium(rng, grid, eq, amplitude=float(rng.uniform(0.05, 0.4)))
    return check_entropy_production_lower_bound(f, eta), f, {"epsilon": eps, "eta": eta}


ORACLES = {
    "csiszar_kullback": _trial_csiszar_kullback,
    "jensen_bound": _trial_jensen,
    "convolution_bound": _trial_convolution,
    "dissipation_interpolation": _trial_interpolation,
    "D_upper_bound": _trial_D_upper,
    "exp_interpolation": _trial_exp,
    "level_set_domination": _trial_level_set,
    "Js1_sign": _trial_js1,
    "entropy_production_lower_bound": _trial_lower_bound,
}


def _dump_reproducer(directory, name: str, trial: int, f: Distribution, params: dict, verdict: Verdict) -> str:
    os.makedirs(directory, exist_ok=True)
    stem = os.path.join(directory, f"{name}-{trial:04d}")
    write_checkpoint(f, stem + ".lfd", gamma=float(params.get("gamma", float("nan"))))
    with open(stem + ".json", "w") as fh:
        json.dump({"oracle": name, "trial": trial, "params": params, "verdict": asdict(verdict)}, fh,
                  indent=2, default=float)
    return stem


def run_suite(seed: int, trials: int = 100, grid: VelocityGrid | None = None, oracles=None,
              report_path=None, reproducer_dir=None) -> dict:
    """Run ``trials`` seeded trials of each oracle.

    Returns ``{oracle: {"passed": int, "failed": int, "vacuous": int}}``.
    With ``report_path`` one JSON object per trial is written, in a fixed
    order, so equal seeds give byte-identical reports.
    """
    grid = build_grid(6.0, 17) if grid is None else grid
    names = list(ORACLES) if oracles is None else list(oracles)
    summary = {}
    out = open(report_path, "w") if report_path is not None else None
    try:
        for index, name in enumerate(names):
            counts = {"passed": 0, "failed": 0, "vacuous": 0}
            for trial in range(trials):
                rng = make_generator(seed, index, trial)
                verdict, f, params = ORACLES[name](rng, grid)
                counts["passed" if verdict.passed else "failed"] += 1
                counts["vacuous"] += int(verdict.vacuous)
                if out is not None:
                    out.write(verdict.to_json(seed=int(seed), trial=trial) + "\n")
                if not verdict.passed and reproducer_dir is not None:
                    _dump_reproducer(reproducer_dir, name, trial, f, params, verdict)
            summary[name] = counts
    finally:
        if out is not None:
            out.close()
    return summary
