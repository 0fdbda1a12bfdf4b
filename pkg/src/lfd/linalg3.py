"""Closed-form eigenvalues of symmetric 3x3 matrix fields (trigonometric method)."""
from __future__ import annotations

import numpy as np

__all__ = ["sym3_eigvalsh"]


def sym3_eigvalsh(A: np.ndarray) -> np.ndarray:
    """Eigenvalues of symmetric matrices ``A`` of shape (3, 3, ...), ascending, shape (3, ...).

    The smallest eigenvalue is accurate to round-off when the two largest
    are (nearly) repeated; in the opposite degenerate case the error is of
    order ``sqrt(machine eps)`` times the eigenvalue spread.
    """
    A = np.asarray(A, dtype=float)
    a11, a22, a33 = A[0, 0], A[1, 1], A[2, 2]
    a12, a13, a23 = A[0, 1], A[0, 2], A[1, 2]
    q = (a11 + a22 + a33) / 3.0
    off = a12 * a12 + a13 * a13 + a23 * a23
    d1, d2, d3 = a11 - q, a22 - q, a33 - q
    p = np.sqrt((d1 * d1 + d2 * d2 + d3 * d3 + 2.0 * off) / 6.0)
    flat = p == 0.0
    ps = np.where(flat, 1.0, p)
    b11, b22, b33 = d1 / ps, d2 / ps, d3 / ps
    b12, b13, b23 = a12 / ps, a13 / ps, a23 / ps
    det = b11 * (b22 * b33 - b23 * b23) - b12 * (b12 * b33 - b23 * b13) + b13 * (b12 * b23 - b22 * b13)
    r = np.clip(0.5 * det, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    mid = 3.0 * q - hi - lo
    return np.stack([lo, mid, hi])
