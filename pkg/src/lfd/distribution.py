"""Grid samples of a distribution function together with its quantum parameter."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import VelocityGrid, integrate


@dataclass(frozen=True)
class Distribution:
    """Node values of ``f`` on ``grid`` for quantum parameter ``epsilon``.

    The Pauli bound ``0 <= f <= 1/epsilon`` (only ``f >= 0`` when
    ``epsilon == 0``) is a property of admissible distributions; it is
    checked by :meth:`is_admissible`, not enforced at construction, since
    intermediate stepper stages are allowed to be slightly outside.
    """

    grid: VelocityGrid
    values: np.ndarray
    epsilon: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        self.grid.check_field(values)
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def upper_bound(self) -> float:
        return np.inf if self.epsilon == 0 else 1.0 / self.epsilon

    def F(self) -> np.ndarray:
        """The Pauli-blocked density f (1 - eps f)."""
        f = self.values
        return f * (1.0 - self.epsilon * f)

    def logit(self, floor: float = 1e-300) -> np.ndarray:
        """``log f - log(1 - eps f)`` with ``f`` clamped strictly inside ``(0, 1/eps)``."""
        x = np.maximum(self.values, floor)
        if self.epsilon > 0:
            x = np.minimum(x, (1.0 - 1e-16) / self.epsilon)
        return np.log(x) - np.log1p(-self.epsilon * x)

    def is_admissible(self, tol: float = 0.0) -> bool:
        f = self.values
        return bool(f.min() >= -tol and f.max() <= self.upper_bound + tol)

    def kappa0(self) -> float:
        return 1.0 - self.epsilon * float(self.values.max())

    def mass(self) -> float:
        return integrate(self.grid, self.values)

    def momentum(self) -> np.ndarray:
        return np.array([integrate(self.grid, self.values * self.grid.coords()[i]) for i in range(3)])

    def energy(self) -> float:
        """Second moment of |v|^2 (not centred)."""
        return integrate(self.grid, self.values * self.grid.speed_sq)

    def with_values(self, values: np.ndarray, **meta) -> "Distribution":
        return Distribution(self.grid, values, self.epsilon, {**self.meta, **meta})
