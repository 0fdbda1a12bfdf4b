"""Grid convolutions ``(K * g)(v_i) = sum_j K(v_i - v_j) g_j w_j``.

Two backends compute the same discrete sum:

* ``fft``: linear convolution by zero padding to a (2N)^3 periodic box,
  with the kernel sampled on the matching wrapped offset lattice. Kernel
  transforms are computed once per (grid, kernel key) and cached.
* ``direct``: the plain O(N^6) sum over sliding windows of the kernel
  sampled on the (2N-1)^3 difference lattice. Reference implementation.

Kernels are passed as *tabulators*: callables mapping an offset array of
shape (3, ...) to component values of shape (ncomp, ...).
"""
from __future__ import annotations

import os
import threading
from typing import Callable, Hashable

import numpy as np
import scipy.fft

from .grid import VelocityGrid

__all__ = ["set_threads", "get_threads", "convolve", "fft_convolve", "direct_convolve", "clear_cache"]

Tabulator = Callable[[np.ndarray], np.ndarray]

_threads = 1
_cache: dict = {}
_cache_lock = threading.Lock()
BACKENDS = ("fft", "direct")


def set_threads(n: int) -> None:
    """Worker count for FFTs; 0 means one per available CPU."""
    global _threads
    _threads = (os.cpu_count() or 1) if n == 0 else max(1, int(n))


def get_threads() -> int:
    return _threads


def clear_cache() -> None:
    with _cache_lock:
        _cache.clear()


def _wrapped_offsets(grid: VelocityGrid) -> np.ndarray:
    n = grid.n
    k = np.arange(2 * n)
    d = np.where(k < n, k, k - 2 * n) * grid.h
    return np.stack(np.meshgrid(d, d, d, indexing="ij"))


def _difference_offsets(grid: VelocityGrid) -> np.ndarray:
    n = grid.n
    d = np.arange(-(n - 1), n) * grid.h
    return np.stack(np.meshgrid(d, d, d, indexing="ij"))


def _kernel_hat(grid: VelocityGrid, key: Hashable, tabulate: Tabulator) -> np.ndarray:
    cache_key = ("fft", grid, key)
    with _cache_lock:
        hit = _cache.get(cache_key)
    if hit is not None:
        return hit
    table = np.asarray(tabulate(_wrapped_offsets(grid)), dtype=float)
    table = table.reshape((-1,) + table.shape[-3:])
    hat = scipy.fft.rfftn(table, axes=(1, 2, 3), workers=_threads)
    hat.setflags(write=False)
    with _cache_lock:
        _cache[cache_key] = hat
    return hat


def _kernel_table(grid: VelocityGrid, key: Hashable, tabulate: Tabulator) -> np.ndarray:
    cache_key = ("direct", grid, key)
    with _cache_lock:
        hit = _cache.get(cache_key)
    if hit is not None:
        return hit
    table = np.asarray(tabulate(_difference_offsets(grid)), dtype=float)
    table = table.reshape((-1,) + table.shape[-3:])
    table.setflags(write=False)
    with _cache_lock:
        _cache[cache_key] = table
    return table


def fft_convolve(grid: VelocityGrid, key: Hashable, tabulate: Tabulator, density: np.ndarray) -> np.ndarray:
    """All kernel components convolved with one weighted density, shape (ncomp, N, N, N)."""
    n = grid.n
    hat = _kernel_hat(grid, key, tabulate)
    dens_hat = scipy.fft.rfftn(density, s=(2 * n,) * 3, workers=_threads)
    out = scipy.fft.irfftn(hat * dens_hat[None], s=(2 * n,) * 3, axes=(1, 2, 3), workers=_threads)
    return np.ascontiguousarray(out[:, :n, :n, :n])


def direct_convolve(grid: VelocityGrid, key: Hashable, tabulate: Tabulator, density: np.ndarray) -> np.ndarray:
    n = grid.n
    table = _kernel_table(grid, key, tabulate)
    flipped = np.ascontiguousarray(density[::-1, ::-1, ::-1])
    out = np.empty((table.shape[0], n, n, n))
    for c in range(table.shape[0]):
        # window starting at i holds K at offsets i - j for j = n-1 .. 0
        windows = np.lib.stride_tricks.sliding_window_view(table[c], (n, n, n))
        out[c] = np.einsum("abcijk,ijk->abc", windows, flipped)
    return out


def _sym_pairs():
    # (i, k) -> position of a_ik in upper-triangle storage
    order = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
    return {**{p: c for c, p in enumerate(order)}, **{(p[1], p[0]): c for c, p in enumerate(order)}}


_SYM = _sym_pairs()


def convolve_matvec(grid: VelocityGrid, key: Hashable, tabulate: Tabulator, vector: np.ndarray,
                    backend: str = "fft") -> np.ndarray:
    """``sum_k A_ik * g_k`` for a symmetric matrix kernel stored as 6 upper-triangle components."""
    n = grid.n
    density = np.asarray(vector, dtype=float) * grid.weights
    out = np.zeros((3, n, n, n))
    if backend == "fft":
        hat = _kernel_hat(grid, key, tabulate)
        dens_hat = scipy.fft.rfftn(density, s=(2 * n,) * 3, axes=(1, 2, 3), workers=_threads)
        spec = np.stack([sum(hat[_SYM[i, k]] * dens_hat[k] for k in range(3)) for i in range(3)])
        full = scipy.fft.irfftn(spec, s=(2 * n,) * 3, axes=(1, 2, 3), workers=_threads)
        return np.ascontiguousarray(full[:, :n, :n, :n])
    if backend == "direct":
        for k in range(3):
            comps = direct_convolve(grid, key, tabulate, density[k])
            for i in range(3):
                out[i] += comps[_SYM[i, k]]
        return out
    raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


def convolve(grid: VelocityGrid, key: Hashable, tabulate: Tabulator, values: np.ndarray,
             backend: str = "fft") -> np.ndarray:
    """Quadrature convolution of node ``values`` (trapezoid weights applied here)."""
    density = np.asarray(values, dtype=float) * grid.weights
    if backend == "fft":
        return fft_convolve(grid, key, tabulate, density)
    if backend == "direct":
        return direct_convolve(grid, key, tabulate, density)
    raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
