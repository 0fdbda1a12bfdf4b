"""Admissible distributions with exact discrete moments.

Moment correction tilts a positive profile ``g`` through the Fermi-Dirac
link::

    f = L(log g + c0 + c . v + c4 |v|^2),   L(x) = e^x / (1 + eps e^x)

and solves for the five multipliers so that the grid moments of ``f`` are
exactly ``(rho, rho u, rho (|u|^2 + 3 theta))``. The link maps into
``(0, 1/eps)`` so no clipping is ever needed. The multipliers minimize a
strictly convex dual function, which makes a damped Newton iteration safe.
"""
from __future__ import annotations

import math

import numpy as np

from .distribution import Distribution
from .errors import MomentCorrectionFailed
from .equilibrium import FermiDiracEquilibrium, solve_fermi_dirac
from .grid import VelocityGrid

__all__ = [
    "fd_link",
    "fd_logit",
    "project_moments",
    "two_bump",
    "random_bumps",
    "perturbed_equilibrium",
    "discrete_equilibrium",
    "MOMENT_TOL",
]

MOMENT_TOL = 1e-12


def fd_link(x: np.ndarray, epsilon: float) -> np.ndarray:
    """``e^x / (1 + eps e^x)`` evaluated without overflow."""
    x = np.asarray(x, dtype=float)
    if epsilon == 0.0:
        return np.exp(x)
    with np.errstate(over="ignore"):
        return 1.0 / (epsilon + np.exp(-x))


def fd_logit(f: np.ndarray, epsilon: float) -> np.ndarray:
    """Inverse of :func:`fd_link`: ``log f - log(1 - eps f)``."""
    f = np.asarray(f, dtype=float)
    return np.log(f) - np.log1p(-epsilon * f)


def _log1p_exp(x):
    return np.logaddexp(0.0, x)


def _basis(grid: VelocityGrid) -> np.ndarray:
    v1, v2, v3 = (grid.coord_field(i) for i in range(3))
    return np.stack([np.ones(grid.shape), v1, v2, v3, grid.speed_sq])


def project_moments(grid: VelocityGrid, log_profile: np.ndarray, epsilon: float, rho: float = 1.0,
                    u=(0.0, 0.0, 0.0), theta: float = 1.0, tol: float = MOMENT_TOL,
                    max_iter: int = 100) -> Distribution:
    """Tilt ``exp(log_profile)`` to the prescribed grid moments.

    Raises
    ------
    MomentCorrectionFailed
        If the Newton iteration does not reach ``tol`` (relative to ``rho``).
    """
    u = np.broadcast_to(np.asarray(u, dtype=float), (3,))
    target = np.array([rho, *(rho * u), rho * (float(u @ u) + 3.0 * theta)])
    psi = _basis(grid)
    w = grid.weights
    base = np.asarray(log_profile, dtype=float)
    lam = np.zeros(5)

    def dual(lam):
        x = base + np.tensordot(lam, psi, axes=1)
        if epsilon == 0.0:
            pot = np.exp(x)
        else:
            pot = _log1p_exp(x + math.log(epsilon)) / epsilon
        return float(np.sum(w * pot) - lam @ target), x

    phi, x = dual(lam)
    for _ in range(max_iter):
        f = fd_link(x, epsilon)
        grad = np.tensordot(psi, w * f, axes=3) - target
        if np.max(np.abs(grad)) <= tol * rho:
            return Distribution(grid, f, epsilon, {"kind": "projected"})
        blocked = w * f * (1.0 - epsilon * f)
        hess = np.einsum("aijk,bijk,ijk->ab", psi, psi, blocked)
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise MomentCorrectionFailed("singular moment Hessian") from exc
        gnorm = np.max(np.abs(grad))
        t = 1.0
        for _ in range(60):
            phi_new, x_new = dual(lam + t * step)
            if not np.isfinite(phi_new):
                t *= 0.5
                continue
            if phi_new <= phi + 1e-4 * t * (grad @ step):
                break
            # near the solution the dual decrease is below round-off; judge by the residual
            grad_new = np.tensordot(psi, w * fd_link(x_new, epsilon), axes=3) - target
            if np.max(np.abs(grad_new)) < gnorm:
                break
            t *= 0.5
        else:
            raise MomentCorrectionFailed(f"line search failed (max residual {gnorm:.3e})")
        lam, phi, x = lam + t * step, phi_new, x_new
    raise MomentCorrectionFailed(f"moment correction did not converge (max residual {np.max(np.abs(grad)):.3e})")


def _gaussian_log(grid: VelocityGrid, center, width: float) -> np.ndarray:
    v = grid.coords()
    r2 = sum((v[i] - center[i]) ** 2 for i in range(3))
    return -0.5 * r2 / width ** 2


def _mixture_log(grid: VelocityGrid, centers, widths, amplitudes) -> np.ndarray:
    logs = [math.log(a) - 1.5 * math.log(2 * math.pi * w * w) + _gaussian_log(grid, c, w)
            for c, w, a in zip(centers, widths, amplitudes)]
    return np.logaddexp.reduce(np.stack(logs), axis=0)


def two_bump(grid: VelocityGrid, epsilon: float, separation: float = 2.0, width: float = 0.7,
             rho: float = 1.0, u=(0.0, 0.0, 0.0), theta: float = 1.0) -> Distribution:
    """Two Gaussian bumps at ``+-separation/2`` along ``v1``, moment-corrected."""
    half = 0.5 * separation
    log_profile = _mixture_log(grid, [(-half, 0, 0), (half, 0, 0)], [width, width], [0.5 * rho, 0.5 * rho])
    out = project_moments(grid, log_profile, epsilon, rho, u, theta)
    return out.with_values(out.values, kind="two-bump")


def random_bumps(rng: np.random.Generator, grid: VelocityGrid, epsilon: float,
                 roughness: float = 0.0) -> Distribution:
    """Random mixture of 2 to 4 bumps, optionally with node-level noise, projected to (1, 0, 3).

    ``roughness`` adds independent ``N(0, roughness^2)`` noise to the log profile.
    """
    k = int(rng.integers(2, 5))
    centers = rng.uniform(-1.5, 1.5, size=(k, 3))
    widths = rng.uniform(0.5, 1.2, size=k)
    amps = rng.uniform(0.2, 1.0, size=k)
    log_profile = _mixture_log(grid, centers, widths, amps / amps.sum())
    if roughness > 0:
        log_profile = log_profile + roughness * rng.standard_normal(grid.shape)
    out = project_moments(grid, log_profile, epsilon)
    return out.with_values(out.values, kind="random-bumps", bumps=k)


def perturbed_equilibrium(rng: np.random.Generator, grid: VelocityGrid, eq: FermiDiracEquilibrium,
                          amplitude: float = 0.3, smooth: bool = True) -> Distribution:
    """``M_eps`` with a random perturbation of its logit, projected back to the moments of ``eq``.

    Smooth perturbations are low-order polynomials times a Gaussian envelope;
    otherwise independent node noise is used.
    """
    v = grid.coords()
    m_log = math.log(eq.a_eps) - eq.b_eps * sum((v[i] - eq.u[i]) ** 2 for i in range(3))
    if smooth:
        c = rng.standard_normal(10)
        poly = (c[0] * v[0] + c[1] * v[1] + c[2] * v[2] + c[3] * v[0] * v[1] + c[4] * v[1] * v[2]
                + c[5] * v[0] * v[2] + c[6] * v[0] ** 2 + c[7] * v[1] ** 2 - (c[6] + c[7]) * v[2] ** 2
                + c[8] * v[0] ** 3 + c[9] * v[1] * v[2] ** 2)
        noise = poly * np.exp(-0.25 * grid.speed_sq)
    else:
        noise = rng.standard_normal(grid.shape)
    # L^-1(M) equals the Gaussian log-profile m_log
    out = project_moments(grid, m_log + amplitude * noise, eq.epsilon, eq.rho, eq.u, eq.theta)
    return out.with_values(out.values, kind="perturbed-equilibrium")


def discrete_equilibrium(grid: VelocityGrid, epsilon: float, rho: float = 1.0, u=(0.0, 0.0, 0.0),
                         theta: float = 1.0) -> Distribution:
    """Fermi-Dirac state of the grid: ``L(c0 + c . v + c4 |v|^2)`` with exact grid moments.

    It maximizes the grid entropy among grid functions with these moments,
    so relative entropies taken against it are nonnegative on the grid.
    """
    eq = solve_fermi_dirac(rho, u, theta, epsilon)
    v = grid.coords()
    m_log = math.log(eq.a_eps) - eq.b_eps * sum((v[i] - eq.u[i]) ** 2 for i in range(3))
    out = project_moments(grid, m_log, epsilon, rho, u, theta)
    return out.with_values(out.values, kind="grid-equilibrium")


def equilibrium_for(epsilon: float, rho: float = 1.0, u=(0.0, 0.0, 0.0), theta: float = 1.0) -> FermiDiracEquilibrium:
    return solve_fermi_dirac(rho, u, theta, epsilon)
