"""Collision coefficient fields Sigma[f], b[f], b[f^2], c[f] on the grid."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convolution import convolve
from .distribution import Distribution
from .errors import BackendMismatch, ConfigurationError
from .kernels import KernelParams, kernel_a, kernel_b, kernel_c
from .linalg3 import sym3_eigvalsh

__all__ = [
    "CollisionFields",
    "compute_fields",
    "ellipticity_floor",
    "cross_check_backends",
    "SYM_INDEX",
    "unpack_sym",
    "tabulate_a",
    "kernel_key",
]

# upper-triangle storage order of the symmetric matrix kernel
SYM_INDEX = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def tabulate_a(params):
    def tabulate(z):
        a = kernel_a(z, params)
        return np.stack([a[i, j] for i, j in SYM_INDEX])
    return tabulate


def _tab_b(params):
    return lambda z: kernel_b(z, params)


def _tab_c(params):
    return lambda z: kernel_c(z, params)[None]


def kernel_key(kind, params):
    return (kind, float(params.gamma), None if params.nu is None else float(params.nu))


@dataclass(frozen=True)
class CollisionFields:
    """Coefficient fields of one time level.

    ``Sigma`` has shape (3, 3, N, N, N) and is exactly symmetric.
    ``bfield``, ``bfield_sq`` and ``cfield`` are ``None`` when only ``Sigma``
    was requested.
    """

    Sigma: np.ndarray
    bfield: np.ndarray | None
    bfield_sq: np.ndarray | None
    cfield: np.ndarray | None
    params: KernelParams
    epsilon: float = 0.0

    def B(self) -> np.ndarray:
        """Pauli-corrected drift b[f] - eps b[f^2] = b[f (1 - eps f)]."""
        if self.bfield_sq is None:
            raise ValueError("bfield_sq was not computed")
        return self.bfield - self.epsilon * self.bfield_sq


def unpack_sym(comps: np.ndarray) -> np.ndarray:
    out = np.empty((3, 3) + comps.shape[1:])
    for c, (i, j) in enumerate(SYM_INDEX):
        out[i, j] = comps[c]
        out[j, i] = comps[c]
    return out


def compute_fields(f: Distribution, params: KernelParams, backend: str = "fft",
                   sigma_only: bool = False) -> CollisionFields:
    """Convolve the regularized kernels with ``f`` (trapezoid quadrature).

    ``Sigma = a^nu * f(1 - eps f)``, ``b = b^nu * f``, ``b_sq = b^nu * f^2``,
    and ``c = c^nu * f``. With ``sigma_only`` only ``Sigma`` is formed.
    """
    if params.nu is None:
        raise ConfigurationError("grid coefficient fields need a regularized kernel (nu > 0)")
    grid = f.grid
    values = f.values
    F = f.F()
    sigma = unpack_sym(convolve(grid, kernel_key("a", params), tabulate_a(params), F, backend))
    bfield = bfield_sq = cfield = None
    if not sigma_only:
        bfield = convolve(grid, kernel_key("b", params), _tab_b(params), values, backend)
        bfield_sq = convolve(grid, kernel_key("b", params), _tab_b(params), values * values, backend)
        cfield = convolve(grid, kernel_key("c", params), _tab_c(params), values, backend)[0]
    return CollisionFields(sigma, bfield, bfield_sq, cfield, params, f.epsilon)


def ellipticity_floor(fields: CollisionFields, nu: float) -> np.ndarray:
    """Smallest eigenvalue of ``Sigma + nu I`` at every node."""
    return sym3_eigvalsh(fields.Sigma)[0] + nu


def cross_check_backends(f: Distribution, params: KernelParams, rtol: float = 1e-10) -> float:
    """Largest relative discrepancy between the fft and direct backends.

    Each field is compared in max norm relative to its own max norm.
    Raises :class:`BackendMismatch` above ``rtol``.
    """
    fast = compute_fields(f, params, "fft")
    slow = compute_fields(f, params, "direct")
    worst = 0.0
    for name in ("Sigma", "bfield", "bfield_sq", "cfield"):
        x, y = getattr(fast, name), getattr(slow, name)
        scale = float(np.max(np.abs(y)))
        if scale == 0.0:
            err = float(np.max(np.abs(x)))
        else:
            err = float(np.max(np.abs(x - y))) / scale
        worst = max(worst, err)
        if err > rtol:
            raise BackendMismatch(f"{name}: fft/direct relative discrepancy {err:.3e} > {rtol:.1e}")
    return worst
