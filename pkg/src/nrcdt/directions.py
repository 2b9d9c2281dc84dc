"""Finite direction sets with uniform gluing weights on S^1, S^2 and SO(3)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

KINDS = ("circle", "sphere2", "so3")


@dataclass(frozen=True)
class DirectionSet:
    """Directions plus uniform weights ``1/n``.

    ``directions`` is ``(n, 2)`` unit vectors for ``circle``, ``(n, 3)`` unit
    vectors for ``sphere2`` and ``(n, 3, 3)`` rotations for ``so3``.
    ``angles`` is set for circle sets only.
    """

    kind: str
    directions: np.ndarray
    angles: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown direction kind {self.kind!r}")
        if len(self.directions) < 1:
            raise ValueError("a direction set needs at least one direction")
        self.directions.setflags(write=False)
        if self.angles is not None:
            self.angles.setflags(write=False)

    def __len__(self):
        return len(self.directions)

    @property
    def weights(self) -> np.ndarray:
        n = len(self)
        return np.full(n, 1.0 / n)

    def is_antipode_closed(self, tol: float = 1e-12) -> bool:
        if self.kind == "so3":
            return False
        D = self.directions
        dist = np.abs(D[:, None, :] + D[None, :, :]).max(axis=2)
        return bool(np.all(dist.min(axis=1) <= tol))

    def to_csv(self) -> str:
        flat = self.directions.reshape(len(self), -1)
        return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in flat)


def _check_count(n):
    if int(n) != n or n < 1:
        raise ValueError(f"direction count must be a positive integer, got {n!r}")
    return int(n)


def equispaced_s1(n: int) -> DirectionSet:
    """Angles ``2 pi k / n`` on the full circle."""
    n = _check_count(n)
    angles = 2 * np.pi * np.arange(n) / n
    vecs = np.column_stack([np.cos(angles), np.sin(angles)])
    return DirectionSet("circle", vecs, angles)


GOLDEN_ANGLE = math.pi * (3 - math.sqrt(5))


def fibonacci_s2(n: int) -> DirectionSet:
    """Fibonacci points ``z_k = 1 - (2k+1)/n`` spun by the golden angle.

    The radial factor is ``sqrt(1 - z_k^2)`` so every point is a unit vector.
    """
    n = _check_count(n)
    k = np.arange(n)
    z = 1 - (2 * k + 1) / n
    r = np.sqrt(1 - z * z)
    vecs = np.column_stack([r * np.cos(k * GOLDEN_ANGLE), r * np.sin(k * GOLDEN_ANGLE), z])
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    return DirectionSet("sphere2", vecs)


@lru_cache(maxsize=None)
def quartic_root() -> float:
    """Positive root of ``x^4 = x + 4``, by bisection on [1, 2]."""
    lo, hi = 1.0, 2.0
    while hi - lo > 1e-15:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if mid ** 4 - mid - 4 > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def quartic_root_closed_form() -> float:
    m_plus = (9 + math.sqrt(49233)) / 18
    m_minus = (9 - math.sqrt(49233)) / 18
    m = np.cbrt(m_plus) + np.cbrt(m_minus)
    return 0.5 * (math.sqrt(m) + math.sqrt(2 / math.sqrt(m) - m))


def super_fibonacci_quaternions(n: int) -> np.ndarray:
    """Unit quaternions ``(a, b, c, d)`` of the Super-Fibonacci spiral."""
    n = _check_count(n)
    phi1 = math.sqrt(2.0)
    phi2 = quartic_root()
    s = 2 * np.arange(n) + 1
    r = np.sqrt(s / (2 * n))
    R = np.sqrt(1 - s / (2 * n))
    alpha = np.pi * s / phi1
    beta = np.pi * s / phi2
    return np.column_stack([r * np.sin(alpha), r * np.cos(alpha), R * np.cos(beta), R * np.sin(beta)])


def quaternion_to_matrix(q) -> np.ndarray:
    """Euler-Rodrigues matrix of unit quaternions ``(a, b, c, d)``; ``(..., 4) -> (..., 3, 3)``."""
    q = np.asarray(q, dtype=float)
    a, b, c, d = np.moveaxis(q, -1, 0)
    M = np.stack([
        1 - 2 * (c * c + d * d), 2 * (b * c - a * d), 2 * (b * d + a * c),
        2 * (b * c + a * d), 1 - 2 * (b * b + d * d), 2 * (c * d - a * b),
        2 * (b * d - a * c), 2 * (c * d + a * b), 1 - 2 * (b * b + c * c),
    ], axis=-1)
    return M.reshape(q.shape[:-1] + (3, 3))


def super_fibonacci_so3(n: int) -> DirectionSet:
    return DirectionSet("so3", quaternion_to_matrix(super_fibonacci_quaternions(n)))


def make_directions(kind: str, n: int) -> DirectionSet:
    if kind == "circle":
        return equispaced_s1(n)
    if kind == "sphere2":
        return fibonacci_s2(n)
    if kind == "so3":
        return super_fibonacci_so3(n)
    raise ValueError(f"unknown direction kind {kind!r}")
