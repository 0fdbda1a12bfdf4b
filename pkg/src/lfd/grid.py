"""Uniform Cartesian velocity grid on [-R, R]^3.

Scalar fields are ``(N, N, N)`` arrays, vector fields ``(3, N, N, N)`` and
symmetric matrix fields ``(3, 3, N, N, N)``. Node coordinates are never
stored per node; :meth:`VelocityGrid.coords` returns broadcastable axis
views instead.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "VelocityGrid",
    "build_grid",
    "integrate",
    "gradient",
    "weight_field",
]

MIN_POINTS = 8


@dataclass(frozen=True)
class VelocityGrid:
    extent: float
    n: int

    def __post_init__(self):
        if not np.isfinite(self.extent) or self.extent <= 0:
            raise ConfigurationError(f"grid extent R must be positive, got {self.extent!r}")
        if int(self.n) != self.n or self.n < MIN_POINTS:
            raise ConfigurationError(f"points per axis N must be an integer >= {MIN_POINTS}, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "extent", float(self.extent))

    @property
    def h(self) -> float:
        return 2.0 * self.extent / (self.n - 1)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def size(self) -> int:
        return self.n ** 3

    @property
    def cell_volume(self) -> float:
        return self.h ** 3

    @cached_property
    def axis(self) -> np.ndarray:
        # i * h - R rather than linspace so spacing is uniform to round-off
        ax = np.arange(self.n) * self.h - self.extent
        ax.setflags(write=False)
        return ax

    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable views ``(v1, v2, v3)`` with shapes (N,1,1), (1,N,1), (1,1,N)."""
        ax = self.axis
        return ax[:, None, None], ax[None, :, None], ax[None, None, :]

    def coord_field(self, i: int) -> np.ndarray:
        return np.broadcast_to(self.coords()[i], self.shape)

    @cached_property
    def speed_sq(self) -> np.ndarray:
        v1, v2, v3 = self.coords()
        out = v1 * v1 + v2 * v2 + v3 * v3
        out.setflags(write=False)
        return out

    @cached_property
    def axis_weights(self) -> np.ndarray:
        """One-dimensional trapezoid weights (h inside, h/2 on the two end nodes)."""
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        w.setflags(write=False)
        return w

    @cached_property
    def weights(self) -> np.ndarray:
        w = self.axis_weights
        out = w[:, None, None] * w[None, :, None] * w[None, None, :]
        out.setflags(write=False)
        return out

    def nearest_origin_index(self) -> tuple[int, int, int]:
        i = int(np.argmin(np.abs(self.axis)))
        return (i, i, i)

    def check_field(self, field: np.ndarray, rank: int = 0) -> None:
        expected = (3,) * rank + self.shape
        if np.shape(field) != expected:
            from .errors import FieldGridMismatch

            raise FieldGridMismatch(f"field shape {np.shape(field)} does not match grid shape {expected}")


def build_grid(extent_R: float, N: int) -> VelocityGrid:
    return VelocityGrid(extent_R, N)


def integrate(grid: VelocityGrid, field: np.ndarray) -> float:
    """Trapezoid-rule integral of a scalar field over the grid box."""
    return float(np.sum(grid.weights * field))


def gradient(grid: VelocityGrid, field: np.ndarray) -> np.ndarray:
    """Second-order finite-difference gradient, returned as a (3, N, N, N) array.

    Central differences in the interior, one-sided second-order stencils on
    the boundary faces.
    """
    field = np.asarray(field, dtype=float)
    return np.stack(np.gradient(field, grid.h, edge_order=2))


def weight_field(grid: VelocityGrid, s: float) -> np.ndarray:
    """Node values of the polynomial weight <v>^s = (1 + |v|^2)^(s/2)."""
    if s == 0:
        return np.ones(grid.shape)
    return (1.0 + grid.speed_sq) ** (0.5 * s)
