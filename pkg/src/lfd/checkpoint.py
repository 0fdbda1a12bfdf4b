"""Binary checkpoints of a distribution.

Layout: a 64-byte ASCII header ``LFD1 N R eps gamma t`` (space separated,
padded with spaces, newline-terminated) followed by ``N^3`` little-endian
float64 node values with the first index varying fastest.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from .distribution import Distribution
from .errors import CheckpointCorrupt
from .grid import VelocityGrid

__all__ = ["Checkpoint", "write_checkpoint", "read_checkpoint", "HEADER_SIZE", "MAGIC"]

log = logging.getLogger(__name__)

MAGIC = "LFD1"
HEADER_SIZE = 64


@dataclass(frozen=True)
class Checkpoint:
    distribution: Distribution
    gamma: float
    t: float


def _header(n: int, extent: float, epsilon: float, gamma: float, t: float) -> bytes:
    text = f"{MAGIC} {n} {extent!r} {epsilon!r} {gamma!r} {t!r}"
    if len(text) > HEADER_SIZE - 1:
        # shortest round-trip text did not fit; trade header precision for space
        text = f"{MAGIC} {n} {extent:.10g} {epsilon:.10g} {gamma:.8g} {t:.10g}"
    if len(text) > HEADER_SIZE - 1:
        raise ValueError("checkpoint header does not fit in 64 bytes")
    return (text.ljust(HEADER_SIZE - 1) + "\n").encode("ascii")


def write_checkpoint(dist: Distribution, path, gamma: float = float("nan"), t: float = 0.0) -> None:
    """Write ``dist`` to ``path`` (atomically, through a temporary file)."""
    grid = dist.grid
    header = _header(grid.n, float(grid.extent), dist.epsilon, float(gamma), float(t))
    body = np.asarray(dist.values, dtype="<f8").tobytes(order="F")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(body)
    os.replace(tmp, path)


def read_checkpoint(path, epsilon: float | None = None) -> Checkpoint:
    """Read a checkpoint.

    Parameters
    ----------
    epsilon
        Expected quantum parameter. When it differs from the header a warning
        is logged and this value is used.

    Raises
    ------
    CheckpointCorrupt
        On a wrong magic, an unparsable header or a payload of the wrong size.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER_SIZE:
        raise CheckpointCorrupt(f"{path}: file shorter than the header")
    try:
        fields = raw[:HEADER_SIZE].decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise CheckpointCorrupt(f"{path}: header is not ASCII") from exc
    if len(fields) != 6 or fields[0] != MAGIC:
        raise CheckpointCorrupt(f"{path}: bad magic or header layout")
    try:
        n = int(fields[1])
        extent, eps, gamma, t = (float(x) for x in fields[2:])
    except ValueError as exc:
        raise CheckpointCorrupt(f"{path}: unparsable header values") from exc
    payload = raw[HEADER_SIZE:]
    if n <= 0 or len(payload) != 8 * n ** 3:
        raise CheckpointCorrupt(f"{path}: payload has {len(payload)} bytes, expected {8 * max(n, 0) ** 3}")
    try:
        grid = VelocityGrid(extent, n)
    except ValueError as exc:
        raise CheckpointCorrupt(f"{path}: invalid grid in header ({exc})") from exc
    values = np.frombuffer(payload, dtype="<f8").reshape((n, n, n), order="F")
    if epsilon is not None and float(epsilon) != eps:
        log.warning("%s: header epsilon %r differs from configured %r; using the configured value",
                    path, eps, epsilon)
        eps = float(epsilon)
    return Checkpoint(Distribution(grid, values.astype(float), eps, {"kind": "checkpoint"}), gamma, t)
