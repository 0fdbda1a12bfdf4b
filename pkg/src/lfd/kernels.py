"""Interaction kernels a, b, c and the regularized radial profile Psi_nu.

For ``Psi(r) = r^(gamma+2)`` the kernels are::

    a(z) = Psi(|z|) (Id - z z^T / |z|^2)
    b(z) = -2 z Psi(|z|) / |z|^2                      (= div a)
    c(z) = -2 [Psi(|z|) + |z| Psi'(|z|)] / |z|^2       (= div div a)

The regularized profile ``Psi_nu`` agrees with ``r^(gamma+2)`` on
``[nu, 1/nu]``, is the quadratic ``nu^gamma r^2`` near the origin and the
constant ``nu^-(gamma+2)`` far out. The junctions are blended in ``log r``
with the degree-9 smoothstep (vanishing derivatives up to order 4 at both
ends) over ``[0.9 nu, nu]`` and ``[1/nu, 1.1/nu]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, SingularKernel

__all__ = [
    "KernelParams",
    "psi_nu",
    "psi_nu_prime",
    "kernel_a",
    "kernel_b",
    "kernel_c",
    "smoothstep9",
    "BLEND_INNER",
    "BLEND_OUTER",
]

BLEND_INNER = 0.9
BLEND_OUTER = 1.1


@dataclass(frozen=True)
class KernelParams:
    """Interaction exponent ``gamma`` and regularization ``nu`` (``None`` = unregularized)."""

    gamma: float
    nu: float | None = None
    strict: bool = True

    def __post_init__(self):
        if self.strict and not (-2.0 < self.gamma < 0.0):
            raise ConfigurationError(f"gamma must lie in (-2, 0), got {self.gamma}")
        if self.nu is not None and not (0.0 < self.nu <= 1.0):
            raise ConfigurationError(f"nu must lie in (0, 1], got {self.nu}")


def smoothstep9(t):
    """C^4 step: 0 for t <= 0, 1 for t >= 1, first four derivatives vanish at both ends."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 5 * (126.0 + t * (-420.0 + t * (540.0 + t * (-315.0 + 70.0 * t))))


def _smoothstep9_prime(t):
    t = np.clip(t, 0.0, 1.0)
    return 630.0 * t ** 4 * (1.0 - t) ** 4


def _profile(r, gamma, nu, derivative):
    r = np.asarray(r, dtype=float)
    power = gamma + 2.0
    if nu is None:
        with np.errstate(divide="ignore"):
            return power * r ** (power - 1.0) if derivative else r ** power

    out = np.empty_like(r)
    r_in = BLEND_INNER * nu
    r_out = 1.0 / nu
    r_far = BLEND_OUTER / nu
    lo_width = math.log(nu / r_in)
    hi_width = math.log(r_far / r_out)
    quad_coef = nu ** gamma
    plateau = nu ** (-power)

    core = r <= r_in
    inner = (r > r_in) & (r < nu)
    bulk = (r >= nu) & (r <= r_out)
    outer = (r > r_out) & (r < r_far)
    far = r >= r_far

    rc = r[core]
    out[core] = 2.0 * quad_coef * rc if derivative else quad_coef * rc * rc

    ri = r[inner]
    t = np.log(ri / r_in) / lo_width
    s = smoothstep9(t)
    p, q = ri ** power, quad_coef * ri * ri
    if derivative:
        dp, dq = power * ri ** (power - 1.0), 2.0 * quad_coef * ri
        out[inner] = dq + s * (dp - dq) + _smoothstep9_prime(t) / (ri * lo_width) * (p - q)
    else:
        out[inner] = q + s * (p - q)

    rb = r[bulk]
    out[bulk] = power * rb ** (power - 1.0) if derivative else rb ** power

    ro = r[outer]
    t = np.log(ro / r_out) / hi_width
    s = smoothstep9(t)
    p = ro ** power
    if derivative:
        dp = power * ro ** (power - 1.0)
        out[outer] = (1.0 - s) * dp + _smoothstep9_prime(t) / (ro * hi_width) * (plateau - p)
    else:
        out[outer] = p + s * (plateau - p)

    out[far] = 0.0 if derivative else plateau
    return out


def _unpack(params):
    if isinstance(params, KernelParams):
        return params.gamma, params.nu
    gamma, nu = params
    return gamma, nu


def psi_nu(r, params):
    """Regularized radial profile. Scalars in, scalars out."""
    gamma, nu = _unpack(params)
    out = _profile(np.atleast_1d(r), gamma, nu, derivative=False)
    return float(out[0]) if np.ndim(r) == 0 else out


def psi_nu_prime(r, params):
    gamma, nu = _unpack(params)
    out = _profile(np.atleast_1d(r), gamma, nu, derivative=True)
    return float(out[0]) if np.ndim(r) == 0 else out


def _prepare(z, params):
    z = np.asarray(z, dtype=float)
    if z.shape[0] != 3:
        raise ValueError("z must have leading dimension 3")
    r2 = np.einsum("i...,i...->...", z, z)
    zero = r2 == 0.0
    gamma, nu = _unpack(params)
    if nu is None and np.any(zero):
        raise SingularKernel("unregularized kernel evaluated at z = 0")
    r = np.sqrt(r2)
    safe_r2 = np.where(zero, 1.0, r2)
    return z, r, safe_r2, zero, gamma, nu


def kernel_a(z, params) -> np.ndarray:
    """Matrix kernel, shape (3, 3, ...) for z of shape (3, ...)."""
    z, r, safe_r2, zero, gamma, nu = _prepare(z, params)
    psi = np.where(zero, 0.0, _profile(r, gamma, nu, False))
    out = -psi * np.einsum("i...,j...->ij...", z, z) / safe_r2
    for i in range(3):
        out[i, i] += psi
    return out


def kernel_b(z, params) -> np.ndarray:
    z, r, safe_r2, zero, gamma, nu = _prepare(z, params)
    psi = np.where(zero, 0.0, _profile(r, gamma, nu, False))
    return -2.0 * z * (psi / safe_r2)


def kernel_c(z, params):
    """Scalar kernel; 0 at z = 0 for the regularized family."""
    z, r, safe_r2, zero, gamma, nu = _prepare(z, params)
    if nu is None:
        out = -2.0 * (gamma + 3.0) * r ** gamma
    else:
        out = np.where(zero, 0.0, -2.0 * (_profile(r, gamma, nu, False) + r * _profile(r, gamma, nu, True)) / safe_r2)
    return float(out) if np.ndim(out) == 0 else out
