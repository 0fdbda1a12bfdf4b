"""Grid refinement studies of the collision operator.

Each study evaluates a functional on a sequence of grids of the same extent
and reports observed orders ``log(e_k / e_{k+1}) / log(h_k / h_{k+1})``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .admissible import random_bumps
from .diagnostics import entropy_production
from .equilibrium import evaluate_equilibrium, solve_fermi_dirac
from .grid import build_grid, integrate
from .kernels import KernelParams
from .oracles import make_generator
from .stepper import assemble_Q, corner_fields

__all__ = ["RefinementRow", "observed_orders", "equilibrium_residual", "conservation_rates", "refinement_study"]


@dataclass(frozen=True)
class RefinementRow:
    functional: str
    N: int
    h: float
    value: float
    order: float


def observed_orders(hs, values) -> list[float]:
    """Orders between consecutive grids; the first entry is NaN."""
    out = [math.nan]
    for (h1, e1), (h2, e2) in zip(zip(hs, values), zip(hs[1:], values[1:])):
        if e1 > 0 and e2 > 0:
            out.append(math.log(e1 / e2) / math.log(h1 / h2))
        else:
            out.append(math.nan)
    return out


def _collision_Q(f, params):
    fields = corner_fields(f, params)
    return assemble_Q(f, fields, params.nu, collisions=True, viscosity=False)


def equilibrium_residual(n: int, gamma: float, epsilon: float, extent: float, nu: float) -> float:
    """``||Q(M_eps)||_1`` of the collision part at the sampled equilibrium."""
    grid = build_grid(extent, n)
    M = evaluate_equilibrium(solve_fermi_dirac(1.0, (0.0, 0.0, 0.0), 1.0, epsilon), grid)
    return integrate(grid, np.abs(_collision_Q(M, KernelParams(gamma, nu))))


def conservation_rates(n: int, gamma: float, epsilon: float, extent: float, nu: float, seed: int):
    """``(|d/dt int v f|, |d/dt int |v|^2 f|)`` of the collision part for a seeded asymmetric state.

    The state is a random bump mixture whose parameters depend only on
    ``seed``, so every grid samples the same continuous profile.
    """
    grid = build_grid(extent, n)
    f = random_bumps(make_generator(seed, 0), grid, epsilon)
    Q = _collision_Q(f, KernelParams(gamma, nu))
    momentum = np.array([integrate(grid, Q * grid.coord_field(i)) for i in range(3)])
    energy = integrate(grid, Q * grid.speed_sq)
    return float(np.linalg.norm(momentum)), abs(energy)


def refinement_study(ns, gamma: float, epsilon: float, extent: float, nu: float, seed: int = 0,
                     productions: bool = True) -> list[RefinementRow]:
    """Rows for the equilibrium residual, momentum and energy rates and ``D^(gamma)(M_eps)``."""
    ns = list(ns)
    hs = [build_grid(extent, n).h for n in ns]
    series = {"Q_L1_equilibrium": [equilibrium_residual(n, gamma, epsilon, extent, nu) for n in ns]}
    rates = [conservation_rates(n, gamma, epsilon, extent, nu, seed) for n in ns]
    series["momentum_rate"] = [r[0] for r in rates]
    series["energy_rate"] = [r[1] for r in rates]
    if productions:
        series["D_gamma_equilibrium"] = [
            entropy_production(evaluate_equilibrium(solve_fermi_dirac(1.0, (0, 0, 0), 1.0, epsilon),
                                                    build_grid(extent, n)), gamma)
            for n in ns]
    rows = []
    for name, values in series.items():
        for n, h, v, p in zip(ns, hs, values, observed_orders(hs, values)):
            rows.append(RefinementRow(name, n, h, v, p))
    return rows
