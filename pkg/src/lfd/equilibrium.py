"""Fermi-Dirac statistics, the saturated state and the saturation threshold.

The Fermi-Dirac statistics with mass ``rho``, bulk velocity ``u`` and
temperature ``theta`` is

    M(v) = a exp(-b |v-u|^2) / (1 + eps a exp(-b |v-u|^2))

with ``(a, b)`` fixed by the mass and temperature constraints. Isotropy in
``v - u`` reduces both constraints to one-dimensional radial integrals, so
the solver never touches the 3D grid.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import simpson

from .distribution import Distribution
from .errors import NoConvergence, NotAdmissible
from .grid import VelocityGrid

__all__ = [
    "FermiDiracEquilibrium",
    "SaturatedState",
    "epsilon_sat",
    "is_admissible",
    "solve_fermi_dirac",
    "evaluate_equilibrium",
    "saturated_state",
    "saturation_radius",
    "radial_moments",
]

DEFAULT_TOL = 1e-10
MAX_ITER = 100
RADIAL_INTERVALS = 512
# integrand cut-off: exp(-TAIL_EXPONENT) ~ 1e-16 relative to the peak
TAIL_EXPONENT = 40.0


def epsilon_sat(rho: float, theta: float) -> float:
    """Quantum parameter at which the saturated state carries temperature ``theta``."""
    return 4.0 * math.pi * (5.0 * theta) ** 1.5 / (3.0 * rho)


def is_admissible(rho: float, theta: float, epsilon: float) -> bool:
    return 5.0 * theta > (3.0 * epsilon * rho / (4.0 * math.pi)) ** (2.0 / 3.0)


def saturation_radius(rho: float, epsilon: float) -> float:
    return (3.0 * rho * epsilon / (4.0 * math.pi)) ** (1.0 / 3.0)


def _fd_profile(r2, log_a, b, epsilon):
    """M(r) and its Pauli-blocked counterpart M (1 - eps M) at squared radii ``r2``."""
    x = log_a - b * r2
    if epsilon == 0.0:
        m = np.exp(x)
        return m, m
    with np.errstate(over="ignore"):
        # m = y / (1 + eps y) with y = exp(x), written to avoid overflow of y
        m = 1.0 / (epsilon + np.exp(-x))
    return m, m * (1.0 - epsilon * m)


def _radial_cutoff(log_a, b):
    r2 = (max(log_a, 0.0) + TAIL_EXPONENT) / b
    # room for the r^6 growth of the highest moment integrand
    r2 += 3.0 * math.log(max(r2, 1.0)) / b
    return math.sqrt(r2)


def radial_moments(log_a: float, b: float, epsilon: float, n: int = RADIAL_INTERVALS):
    """Mass and centred second moment of the FD profile plus their Jacobian.

    Returns ``(moments, jacobian)`` where ``moments = (mass, int M |v-u|^2)``
    and ``jacobian[k, j]`` is the derivative of moment ``k`` with respect to
    ``(log a, log b)[j]``.
    """
    r = np.linspace(0.0, _radial_cutoff(log_a, b), n + 1)
    r2 = r * r
    m, blocked = _fd_profile(r2, log_a, b, epsilon)
    four_pi = 4.0 * math.pi
    i2 = four_pi * simpson(r2 * m, x=r)
    i4 = four_pi * simpson(r2 * r2 * m, x=r)
    j2 = four_pi * simpson(r2 * blocked, x=r)
    j4 = four_pi * simpson(r2 * r2 * blocked, x=r)
    j6 = four_pi * simpson(r2 * r2 * r2 * blocked, x=r)
    jac = np.array([[j2, -b * j4], [j4, -b * j6]])
    return np.array([i2, i4]), jac


@dataclass(frozen=True)
class FermiDiracEquilibrium:
    rho: float
    u: tuple[float, float, float]
    theta: float
    epsilon: float
    a_eps: float
    b_eps: float
    iterations: int = 0
    residual: float = 0.0

    @property
    def peak(self) -> float:
        """sup M = a / (1 + eps a), attained at v = u."""
        return self.a_eps / (1.0 + self.epsilon * self.a_eps)

    def values_at(self, r2: np.ndarray) -> np.ndarray:
        """Profile at squared distances ``|v - u|^2``."""
        return _fd_profile(np.asarray(r2, dtype=float), math.log(self.a_eps), self.b_eps, self.epsilon)[0]

    def to_record(self) -> dict:
        rec = asdict(self)
        u = rec.pop("u")
        rec.update(u1=u[0], u2=u[1], u3=u[2])
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "FermiDiracEquilibrium":
        rec = dict(rec)
        u = (float(rec.pop("u1")), float(rec.pop("u2")), float(rec.pop("u3")))
        kw = {k: float(v) for k, v in rec.items()}
        kw["iterations"] = int(kw.get("iterations", 0))
        return cls(u=u, **kw)


@dataclass(frozen=True)
class SaturatedState:
    rho: float
    u: tuple[float, float, float]
    epsilon: float

    @property
    def radius(self) -> float:
        return saturation_radius(self.rho, self.epsilon)


def solve_fermi_dirac(
    rho: float,
    u=(0.0, 0.0, 0.0),
    theta: float = 1.0,
    epsilon: float = 0.0,
    tol: float = DEFAULT_TOL,
    seed: tuple[float, float] | None = None,
    max_iter: int = MAX_ITER,
) -> FermiDiracEquilibrium:
    """Find ``(a_eps, b_eps)`` matching mass ``rho`` and temperature ``theta``.

    Damped Newton iteration in ``(log a, log b)`` on the radial moment
    equations. The step is halved while the residual grows.

    Parameters
    ----------
    seed
        Optional starting ``(a, b)``; defaults to the Maxwellian values
        ``(rho (2 pi theta)^(-3/2), 1/(2 theta))``.

    Raises
    ------
    NotAdmissible
        If ``5 theta <= (3 eps rho / 4 pi)^(2/3)``.
    NoConvergence
        If the iteration stalls, typically as ``eps`` approaches
        ``epsilon_sat(rho, theta)``.
    """
    if rho <= 0 or theta <= 0:
        raise NotAdmissible(f"rho and theta must be positive (rho={rho}, theta={theta})")
    if epsilon < 0:
        raise NotAdmissible(f"epsilon must be nonnegative, got {epsilon}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not is_admissible(rho, theta, epsilon):
        raise NotAdmissible(
            f"5*theta = {5 * theta:g} <= (3 eps rho / 4 pi)^(2/3) = "
            f"{(3 * epsilon * rho / (4 * math.pi)) ** (2 / 3):g}; eps_sat = {epsilon_sat(rho, theta):g}"
        )
    u = tuple(float(c) for c in np.broadcast_to(np.asarray(u, dtype=float), (3,)))
    target = np.array([rho, 3.0 * rho * theta])
    threshold = tol * rho * max(1.0, theta)

    if seed is None:
        seed = (rho / (2.0 * math.pi * theta) ** 1.5, 0.5 / theta)
    x = np.log(np.asarray(seed, dtype=float))

    def residual(x):
        mom, jac = radial_moments(x[0], math.exp(x[1]), epsilon)
        return mom - target, jac

    res, jac = residual(x)
    merit = float(np.max(np.abs(res / target)))
    for it in range(1, max_iter + 1):
        if np.max(np.abs(res)) <= threshold:
            return FermiDiracEquilibrium(rho, u, theta, epsilon, math.exp(x[0]), math.exp(x[1]), it - 1,
                                         float(np.max(np.abs(res))))
        try:
            step = -np.linalg.solve(jac, res)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence("singular Newton Jacobian", residual=merit, iterations=it) from exc
        # keep a single step from jumping many orders of magnitude
        step *= min(1.0, 5.0 / max(np.max(np.abs(step)), 1e-300))
        lam = 1.0
        for _ in range(40):
            x_new = x + lam * step
            res_new, jac_new = residual(x_new)
            merit_new = float(np.max(np.abs(res_new / target)))
            if np.isfinite(merit_new) and merit_new < merit:
                break
            lam *= 0.5
        else:
            raise NoConvergence(
                f"Newton stalled at relative residual {merit:.3e}", residual=merit, iterations=it
            )
        x, res, jac, merit = x_new, res_new, jac_new, merit_new
    if np.max(np.abs(res)) <= threshold:
        return FermiDiracEquilibrium(rho, u, theta, epsilon, math.exp(x[0]), math.exp(x[1]), max_iter,
                                     float(np.max(np.abs(res))))
    raise NoConvergence(
        f"no convergence after {max_iter} iterations (relative residual {merit:.3e})",
        residual=merit,
        iterations=max_iter,
    )


def _shifted_r2(grid: VelocityGrid, u) -> np.ndarray:
    v1, v2, v3 = grid.coords()
    return (v1 - u[0]) ** 2 + (v2 - u[1]) ** 2 + (v3 - u[2]) ** 2


def evaluate_equilibrium(eq: FermiDiracEquilibrium, grid: VelocityGrid) -> Distribution:
    values = eq.values_at(_shifted_r2(grid, eq.u))
    return Distribution(grid, values, eq.epsilon, {"kind": "equilibrium"})


def saturated_state(rho: float, u, epsilon: float, grid: VelocityGrid) -> Distribution:
    """Indicator of the ball of radius ``(3 rho eps / 4 pi)^(1/3)`` scaled by 1/eps."""
    if epsilon <= 0:
        raise ValueError("the saturated state needs epsilon > 0")
    u = tuple(np.broadcast_to(np.asarray(u, dtype=float), (3,)))
    radius = saturation_radius(rho, epsilon)
    inside = _shifted_r2(grid, u) <= radius * radius
    return Distribution(grid, np.where(inside, 1.0 / epsilon, 0.0), epsilon, {"kind": "saturated"})
