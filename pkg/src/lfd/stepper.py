"""Weak-form assembly and explicit time stepping of the regularized problem.

With ``F = f (1 - eps f)`` and the logit ``h = log f - log(1 - eps f)`` one
has ``grad f = F grad h``, and the collision term admits the weak form

    int phi Q = -1/2 int int F F_* (grad phi - grad phi_*) . a (grad h - grad h_*).

The scheme discretizes exactly this pairing. For each of the two corner
orientations ``tau = +1`` (forward differences along all axes) and
``tau = -1`` (backward differences) let ``D`` be the one-sided difference
operator, whose last row uses the quadratic extrapolation so that ``D`` is
exact on quadratics everywhere, and let ``W`` be the trapezoid weights. Then

    J   = Ft (Sigma_t D h - a * (Ft D h)),     Sigma_t = a * Ft,
    Q   = -1/2 sum_tau W^-1 D^T W J,

where ``Ft`` is a corner value of ``F``: the geometric mean of ``F`` over the
node and its three ``tau`` neighbours, capped at four times their minimum.
Because ``D`` maps ``1``, ``v`` and ``|v|^2`` to ``0``, ``e_k`` and
``2 v + tau h`` and ``a(z) z = 0``, the discrete mass, momentum and energy
rates vanish up to round-off, ``Q`` vanishes at any state with a quadratic
logit, and ``sum W h Q = -1/2 sum_tau (pairs) <= 0`` so the entropy grows
along the semi-discrete flow. The cap makes the corner value vanish linearly
when any corner node reaches ``f = 0`` or ``f = 1/eps``, which keeps explicit
steps inside the Pauli bounds where tails are under-resolved.

The ``nu`` Laplacian uses two-point face fluxes and a dual cell width that is
``h/2`` on boundary nodes, matching the trapezoid weights.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .coefficients import CollisionFields, kernel_key, tabulate_a, unpack_sym
from .convolution import convolve, convolve_matvec
from .distribution import Distribution
from .errors import BoundViolation, ConfigurationError
from .grid import integrate
from .kernels import KernelParams
from .linalg3 import sym3_eigvalsh

__all__ = [
    "SimulationState",
    "CornerFields",
    "corner_fields",
    "one_sided_difference",
    "one_sided_difference_T",
    "assemble_Q",
    "rhs",
    "stable_dt",
    "step",
    "BOUND_TOL",
]

log = logging.getLogger(__name__)

BOUND_TOL = 1e-10
# clamp for the logit on nodes where f = 0; their corners carry zero weight anyway
LOGIT_FLOOR = 1e-300
# the cap binds only where corner values differ by more than a factor 4^(4/3)
CORNER_MEAN_CAP = 4.0
ORIENTATIONS = (1, -1)
SCHEMES = ("euler", "rk2")


@dataclass(frozen=True)
class SimulationState:
    t: float
    f: Distribution
    params: KernelParams
    step_count: int = 0
    collisions: bool = True
    clip: bool = False
    clipped_mass: float = 0.0
    backend: str = "fft"

    @property
    def nu(self) -> float:
        return self.params.nu


def _axis_slice(ndim: int, axis: int, s) -> tuple:
    idx = [slice(None)] * ndim
    idx[axis] = s
    return tuple(idx)


def one_sided_difference(u: np.ndarray, axis: int, tau: int, h: float) -> np.ndarray:
    """Forward (``tau = 1``) or backward (``tau = -1``) difference along ``axis``.

    The end node without a neighbour uses the quadratically extrapolated
    ghost value, so the operator is exact on quadratics at every node.
    """
    n = u.shape[axis]
    if n < 3:
        raise ValueError("one-sided differences need at least 3 nodes per axis")
    S = lambda s: _axis_slice(u.ndim, axis, s)  # noqa: E731
    out = np.empty_like(u)
    if tau > 0:
        out[S(slice(0, n - 1))] = u[S(slice(1, n))] - u[S(slice(0, n - 1))]
        out[S(n - 1)] = 2.0 * u[S(n - 1)] - 3.0 * u[S(n - 2)] + u[S(n - 3)]
    else:
        out[S(slice(1, n))] = u[S(slice(1, n))] - u[S(slice(0, n - 1))]
        out[S(0)] = -2.0 * u[S(0)] + 3.0 * u[S(1)] - u[S(2)]
    return out / h


def one_sided_difference_T(y: np.ndarray, axis: int, tau: int, h: float) -> np.ndarray:
    """Exact transpose of :func:`one_sided_difference` in the plain dot product."""
    n = y.shape[axis]
    S = lambda s: _axis_slice(y.ndim, axis, s)  # noqa: E731
    out = np.zeros_like(y)
    if tau > 0:
        body = y[S(slice(0, n - 1))]
        out[S(slice(1, n))] += body
        out[S(slice(0, n - 1))] -= body
        end = y[S(n - 1)]
        out[S(n - 1)] += 2.0 * end
        out[S(n - 2)] -= 3.0 * end
        out[S(n - 3)] += end
    else:
        body = y[S(slice(1, n))]
        out[S(slice(1, n))] += body
        out[S(slice(0, n - 1))] -= body
        end = y[S(0)]
        out[S(0)] -= 2.0 * end
        out[S(1)] += 3.0 * end
        out[S(2)] -= end
    return out / h


def _corner_weight(F: np.ndarray, tau: int) -> np.ndarray:
    """Capped geometric mean of ``F`` over the node and its ``tau`` neighbours."""
    F = np.maximum(F, 0.0)
    n = F.shape[0]
    corner = [F]
    for k in range(3):
        nb = np.roll(F, -tau, axis=k)
        end = n - 1 if tau > 0 else 0
        nb[_axis_slice(3, k, end)] = F[_axis_slice(3, k, end)]
        corner.append(nb)
    V = np.stack(corner)
    low = V.min(axis=0)
    with np.errstate(divide="ignore"):
        gm = np.exp(np.mean(np.log(V), axis=0))
    gm = np.where(low > 0.0, gm, 0.0)
    return np.minimum(gm, CORNER_MEAN_CAP * low)


@dataclass(frozen=True)
class CornerFields:
    """Per-orientation stepper coefficients of one state.

    ``weight[t]`` is the corner value of ``F``, ``Sigma[t] = a * weight[t]``
    with shape (3, 3, N, N, N), ``logit_diff[t]`` the one-sided logit
    differences and ``drift[t] = a * (weight[t] logit_diff[t])``, for the
    orientations in ``ORIENTATIONS``.
    """

    weight: tuple
    Sigma: tuple
    logit_diff: tuple
    drift: tuple


def corner_fields(f: Distribution, params: KernelParams, backend: str = "fft") -> CornerFields:
    """Convolutions needed by :func:`assemble_Q` for the state ``f``."""
    if params.nu is None:
        raise ConfigurationError("the stepper needs a regularized kernel (nu > 0)")
    grid = f.grid
    key, tab = kernel_key("a", params), tabulate_a(params)
    F = f.F()
    logit = f.logit(LOGIT_FLOOR)
    weights, sigmas, diffs, drifts = [], [], [], []
    for tau in ORIENTATIONS:
        w = _corner_weight(F, tau)
        Dh = np.stack([one_sided_difference(logit, k, tau, grid.h) for k in range(3)])
        weights.append(w)
        diffs.append(Dh)
        sigmas.append(unpack_sym(convolve(grid, key, tab, w, backend)))
        drifts.append(convolve_matvec(grid, key, tab, w * Dh, backend))
    return CornerFields(tuple(weights), tuple(sigmas), tuple(diffs), tuple(drifts))


def _viscous_divergence(values: np.ndarray, nu: float, h: float) -> np.ndarray:
    Q = np.zeros(values.shape)
    for k in range(3):
        flux = nu * np.diff(values, axis=k) / h
        pad = [(0, 0)] * 3
        pad[k] = (1, 1)
        diff = np.diff(np.pad(flux, pad), axis=k)
        width = np.full(values.shape[k], h)
        width[0] = width[-1] = 0.5 * h
        bshape = [1, 1, 1]
        bshape[k] = -1
        Q += diff / width.reshape(bshape)
    return Q


def assemble_Q(f: Distribution, fields: CornerFields | None, nu: float,
               collisions: bool = True, viscosity: bool = True) -> np.ndarray:
    """Right-hand side of the weak-form scheme plus the ``nu`` Laplacian.

    Parameters
    ----------
    fields
        Output of :func:`corner_fields` for the same ``f``; ignored (may be
        ``None``) when ``collisions`` is false.
    collisions, viscosity
        Switch the collision part and the ``nu`` Laplacian independently.
    """
    grid = f.grid
    h = grid.h
    Q = _viscous_divergence(f.values, nu, h) if viscosity else np.zeros(grid.shape)
    if not collisions:
        return Q
    if fields is None:
        raise ValueError("collision part requested without coefficient fields")
    w = grid.weights
    for t, tau in enumerate(ORIENTATIONS):
        grid.check_field(fields.Sigma[t], rank=2)
        Dh = fields.logit_diff[t]
        J = fields.weight[t] * (np.einsum("ij...,j...->i...", fields.Sigma[t], Dh) - fields.drift[t])
        for k in range(3):
            Q -= 0.5 * one_sided_difference_T(w * J[k], k, tau, h) / w
    return Q


def stable_dt(state: SimulationState, fields: CornerFields | CollisionFields | None, cfl: float) -> float:
    """``cfl h^2 / (6 (max lambda_max(Sigma + nu I) + h max|b| max f))``.

    With :class:`CornerFields` the largest eigenvalue is taken over both
    orientations and the drift ``a * (Ft D h)`` stands in for ``b``.
    """
    if not (0.0 < cfl <= 1.0):
        raise ValueError(f"cfl must lie in (0, 1], got {cfl}")
    h = state.f.grid.h
    nu = state.nu
    if fields is None or not state.collisions:
        lam, drift = nu, 0.0
    else:
        if isinstance(fields, CornerFields):
            sigmas, bs = fields.Sigma, fields.drift
        else:
            if fields.bfield is None:
                raise ValueError("stable_dt needs bfield; compute the fields with sigma_only=False")
            sigmas, bs = (fields.Sigma,), (fields.bfield,)
        lam = max(float(np.max(sym3_eigvalsh(s)[2])) for s in sigmas) + nu
        bmag = max(float(np.max(np.sqrt(np.sum(b ** 2, axis=0)))) for b in bs)
        drift = h * bmag * float(np.max(state.f.values))
    return cfl * h * h / (6.0 * (lam + drift))


def rhs(state: SimulationState, f: Distribution, fields: CornerFields | None = None):
    """Right-hand side at ``f`` together with the corner fields used."""
    if state.collisions and fields is None:
        fields = corner_fields(f, state.params, state.backend)
    return assemble_Q(f, fields if state.collisions else None, state.nu, state.collisions), fields


def _check_bounds(f: Distribution, reference_max: float) -> None:
    values = f.values
    if f.epsilon > 0:
        tol = BOUND_TOL / f.epsilon
        upper = 1.0 / f.epsilon + tol
    else:
        tol = BOUND_TOL * reference_max
        upper = np.inf
    fmin, fmax = float(values.min()), float(values.max())
    if fmin < -tol or fmax > upper:
        raise BoundViolation(f"Pauli bound violated: min f = {fmin:.3e}, max f = {fmax:.6e}",
                             fmin=fmin, fmax=fmax)


def step(state: SimulationState, dt: float, scheme: str = "rk2",
         fields: CornerFields | None = None) -> SimulationState:
    """Advance one explicit step; the coefficients are recomputed at every stage.

    ``fields`` may carry the corner fields of ``state.f`` to save one
    convolution pass. Raises :class:`BoundViolation` when the new values
    leave ``[0, 1/eps]`` (beyond ``1e-10/eps``, or ``1e-10 max f`` when
    ``eps = 0``) and clipping is disabled.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return state
    f = state.f
    k1, _ = rhs(state, f, fields)
    if scheme == "euler":
        new = f.values + dt * k1
    else:
        mid = f.with_values(f.values + 0.5 * dt * k1)
        k2, _ = rhs(state, mid)
        new = f.values + dt * k2
    clipped = 0.0
    if state.clip:
        hi = 1.0 / f.epsilon if f.epsilon > 0 else np.inf
        clipped_values = np.clip(new, 0.0, hi)
        clipped = integrate(f.grid, np.abs(clipped_values - new))
        if clipped > 0:
            log.info("step %d: clipped mass %.3e", state.step_count + 1, clipped)
        new = clipped_values
    new_f = f.with_values(new)
    if not state.clip:
        _check_bounds(new_f, float(f.values.max()))
    return replace(state, t=state.t + dt, f=new_f, step_count=state.step_count + 1,
                   clipped_mass=state.clipped_mass + clipped)
