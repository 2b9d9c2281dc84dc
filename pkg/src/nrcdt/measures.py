"""Measure, image and point-cloud containers plus the geometric maps acting on them.

Images live on a square pixel grid whose pixel squares tile
``[-w/2, w/2] x [-h/2, h/2]`` with pitch ``sqrt(2) / max(width, height)``,
so a square image fills ``[-1/sqrt(2), 1/sqrt(2)]^2`` and therefore sits
inside the closed unit disk.  Pixel values are densities: an image is
normalized when ``pixels.sum() * pitch**2 == 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

MASS_TOL = 1e-12


class DegenerateError(ValueError):
    """Raised when a numerical object is too degenerate to be transformed."""


class SupportError(ValueError):
    """Raised when a transformed image would leave the admissible domain."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Measure1D:
    """Discrete probability measure on the real line.

    Atoms are sorted; atoms closer than ``1e-12 * (1 + |pos|)`` are merged
    and their weights summed.  Zero weights are kept so that binned
    measures (stripe histograms) retain their grid.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __init__(self, atoms, weights=None, *, normalize=False):
        atoms = np.asarray(atoms, dtype=float).ravel()
        if weights is None:
            weights = np.full(atoms.size, 1.0 / max(atoms.size, 1))
        weights = np.asarray(weights, dtype=float).ravel()
        if atoms.size == 0:
            raise ValueError("a measure needs at least one atom")
        if atoms.shape != weights.shape:
            raise ValueError("atoms and weights differ in length")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise ValueError("atoms and weights must be finite")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        order = np.argsort(atoms, kind="stable")
        atoms, weights = atoms[order], weights[order]
        if atoms.size > 1:
            gap = np.diff(atoms)
            new = np.concatenate(([True], gap > 1e-12 * (1.0 + np.abs(atoms[:-1]))))
            if not new.all():
                group = np.cumsum(new) - 1
                weights = np.bincount(group, weights=weights)
                atoms = atoms[new]
        total = weights.sum()
        if normalize:
            if total <= 0:
                raise DegenerateError("measure has zero mass")
            weights = weights / total
        elif abs(total - 1.0) > MASS_TOL * max(1, atoms.size):
            raise ValueError(f"weights sum to {total!r}, expected 1")
        object.__setattr__(self, "atoms", _frozen(atoms))
        object.__setattr__(self, "weights", _frozen(weights))

    def __len__(self):
        return self.atoms.size

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def pushforward(self, scale: float = 1.0, shift: float = 0.0) -> "Measure1D":
        """Image of the measure under ``t -> scale * t + shift``."""
        return Measure1D(scale * self.atoms + shift, self.weights)


@dataclass(frozen=True)
class AffineMap:
    """The map ``x -> A x + y`` with ``A`` invertible."""

    A: np.ndarray
    y: np.ndarray

    def __init__(self, A, y=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        y = np.zeros(A.shape[0]) if y is None else np.asarray(y, dtype=float).ravel()
        if y.shape != (A.shape[0],):
            raise ValueError("translation has the wrong dimension")
        if abs(np.linalg.det(A)) <= 1e-12:
            raise DegenerateError("A is singular")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.A.T + self.y

    def compose(self, inner: "AffineMap") -> "AffineMap":
        """Return ``self o inner``."""
        return AffineMap(self.A @ inner.A, self.A @ inner.y + self.y)

    def inverse(self) -> "AffineMap":
        Ainv = np.linalg.inv(self.A)
        return AffineMap(Ainv, -Ainv @ self.y)

    @classmethod
    def identity(cls, d: int = 2) -> "AffineMap":
        return cls(np.eye(d))


def rotation2d(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def is_rotation(M, tol: float = 1e-9) -> bool:
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3):
        return False
    return (np.abs(M.T @ M - np.eye(3)).max() <= tol
            and abs(np.linalg.det(M) - 1.0) <= tol)


@dataclass(frozen=True)
class PointCloud:
    """Weighted point set in R^d, or a weighted set of 3x3 rotations.

    ``points`` has shape ``(K, d)`` in vector mode and ``(K, 3, 3)`` in
    SO(3) mode.
    """

    points: np.ndarray
    weights: np.ndarray

    def __init__(self, points, weights=None):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if points.ndim not in (2, 3) or points.shape[0] == 0:
            raise ValueError("expected a non-empty (K, d) or (K, 3, 3) array")
        if points.ndim == 3:
            if points.shape[1:] != (3, 3):
                raise ValueError("SO(3) clouds need 3x3 matrices")
            gram = np.einsum("kji,kjl->kil", points, points)
            if (np.abs(gram - np.eye(3)).max() > 1e-9
                    or np.abs(np.linalg.det(points) - 1).max() > 1e-9):
                raise ValueError("SO(3) cloud contains a non-rotation matrix")
        if not np.all(np.isfinite(points)):
            raise ValueError("points must be finite")
        K = points.shape[0]
        if weights is None:
            weights = np.full(K, 1.0 / K)
        weights = np.asarray(weights, dtype=float).ravel()
        if weights.shape != (K,) or np.any(weights < 0):
            raise ValueError("need one nonnegative weight per point")
        if abs(weights.sum() - 1.0) > MASS_TOL * max(1, K):
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "points", _frozen(points))
        object.__setattr__(self, "weights", _frozen(weights))

    @property
    def is_so3(self) -> bool:
        return self.points.ndim == 3

    @property
    def dim(self) -> int:
        return 3 if self.is_so3 else self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def rotate_left(self, R) -> "PointCloud":
        """The pushforward ``(R .)_# mu`` of an SO(3) cloud."""
        if not self.is_so3:
            raise ValueError("rotate_left needs an SO(3) cloud")
        return PointCloud(np.einsum("ij,kjl->kil", np.asarray(R, float), self.points),
                          self.weights)


def apply_affine_points(cloud: PointCloud, amap: AffineMap) -> PointCloud:
    if cloud.is_so3:
        raise ValueError("affine maps act on vector clouds only")
    if cloud.dim != amap.dim:
        raise ValueError(f"cloud has dimension {cloud.dim}, map has {amap.dim}")
    return PointCloud(amap(cloud.points), cloud.weights)


@dataclass(frozen=True)
class GridImage:
    """Nonnegative gray-value image on the centered square pixel grid."""

    pixels: np.ndarray
    pitch: float = field(init=False)

    def __init__(self, pixels, *, normalize=True):
        pixels = np.asarray(pixels, dtype=float)
        if pixels.ndim != 2 or pixels.size == 0:
            raise ValueError("pixels must be a non-empty 2-D array")
        if not np.all(np.isfinite(pixels)) or np.any(pixels < 0):
            raise ValueError("pixel values must be finite and nonnegative")
        pitch = math.sqrt(2.0) / max(pixels.shape)
        total = pixels.sum() * pitch * pitch
        if total <= 0:
            raise DegenerateError("image has zero mass")
        if normalize:
            pixels = pixels / total
        object.__setattr__(self, "pixels", _frozen(pixels))
        object.__setattr__(self, "pitch", pitch)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def mass(self) -> float:
        return float(self.pixels.sum() * self.pitch ** 2)

    @property
    def pixel_area(self) -> float:
        return self.pitch ** 2

    def centers(self):
        """Pixel-center coordinates ``(x, y)``, each of shape ``(height, width)``.

        Row 0 is the top of the image, so ``y`` decreases with the row index.
        """
        h = self.pitch
        x = (np.arange(self.width) + 0.5 - self.width / 2) * h
        y = (self.height / 2 - np.arange(self.height) - 0.5) * h
        return np.meshgrid(x, y)

    def to_index(self, x, y):
        """Fractional (row, col) indices of the points ``(x, y)``."""
        col = np.asarray(x) / self.pitch + self.width / 2 - 0.5
        row = self.height / 2 - 0.5 - np.asarray(y) / self.pitch
        return row, col

    def as_point_cloud(self) -> PointCloud:
        """Pixel centers weighted by their mass (zero pixels dropped)."""
        x, y = self.centers()
        m = self.pixels > 0
        w = self.pixels[m]
        return PointCloud(np.column_stack([x[m], y[m]]), w / w.sum())


def bilinear_sample(img: np.ndarray, row, col) -> np.ndarray:
    """Bilinear interpolation with zero padding outside the grid."""
    H, W = img.shape
    r0 = np.floor(row).astype(int)
    c0 = np.floor(col).astype(int)
    fr = row - r0
    fc = col - c0
    out = np.zeros(np.shape(row))
    for dr, wr in ((0, 1 - fr), (1, fr)):
        for dc, wc in ((0, 1 - fc), (1, fc)):
            rr, cc = r0 + dr, c0 + dc
            ok = (rr >= 0) & (rr < H) & (cc >= 0) & (cc < W)
            vals = np.where(ok, img[np.clip(rr, 0, H - 1), np.clip(cc, 0, W - 1)], 0.0)
            out += wr * wc * vals
    return out


def apply_affine_image(img: GridImage, amap: AffineMap, *, name: str | None = None) -> GridImage:
    """Pull-back resampling ``out(p) = in(A^{-1}(p - y))`` with bilinear interpolation.

    The support of the input, pushed forward by the map and padded by one
    pixel, must stay inside the pixel grid (which itself lies inside the
    unit disk); otherwise :class:`SupportError` is raised.
    """
    if amap.dim != 2:
        raise ValueError("image maps must be two-dimensional")
    x, y = img.centers()
    rows, cols = np.nonzero(img.pixels)
    corners = []
    h = img.pitch
    for sx in (-0.5, 0.5):
        for sy in (-0.5, 0.5):
            corners.append(np.column_stack([x[rows, cols] + sx * h, y[rows, cols] + sy * h]))
    moved = amap(np.concatenate(corners))
    half_w, half_h = img.width * h / 2 - h, img.height * h / 2 - h
    if (np.abs(moved[:, 0]).max() > half_w or np.abs(moved[:, 1]).max() > half_h
            or np.hypot(moved[:, 0], moved[:, 1]).max() > 1.0):
        label = name or f"A={amap.A.tolist()}, y={amap.y.tolist()}"
        raise SupportError(f"transformed support leaves the image domain ({label})")
    inv = amap.inverse()
    src = inv(np.column_stack([x.ravel(), y.ravel()]))
    r, c = img.to_index(src[:, 0], src[:, 1])
    out = bilinear_sample(img.pixels, r, c).reshape(img.pixels.shape)
    return GridImage(np.maximum(out, 0.0))


def _quadratic_weights(d):
    # Lagrange basis on nodes -1, 0, 1
    return (0.5 * d * (d - 1), 1.0 - d * d, 0.5 * d * (d + 1))


def biquadratic_sample(img: np.ndarray, row, col) -> np.ndarray:
    """Tensor-product quadratic Lagrange interpolation on the nearest 3x3 stencil.

    Stencil indices are clamped to the grid, which reproduces constants
    exactly up to the boundary.
    """
    H, W = img.shape
    r0 = np.rint(row).astype(int)
    c0 = np.rint(col).astype(int)
    wr = _quadratic_weights(row - r0)
    wc = _quadratic_weights(col - c0)
    out = np.zeros(np.shape(row))
    for i, a in enumerate((-1, 0, 1)):
        rr = np.clip(r0 + a, 0, H - 1)
        for j, b in enumerate((-1, 0, 1)):
            cc = np.clip(c0 + b, 0, W - 1)
            out += wr[i] * wc[j] * img[rr, cc]
    return out


WARP_FREQ_RANGE = (1.5, 2.5)
WARP_AMP_RANGE = (0.5, 2.0)


def warp_image(img: GridImage, f1: float, f2: float, a1: float, a2: float) -> GridImage:
    """Sinusoidal non-affine deformation.

    Pixel ``(j, k)`` (row, column) receives the bi-quadratically interpolated
    value at ``(j + a1 sin(2 pi f1 k / N), k + a2 cos(2 pi f2 j / N))`` with
    ``N`` the image width.  Samples outside the grid are clamped to the
    boundary.  Interpolation overshoot below zero is clipped before the
    result is renormalized.
    """
    if not warp_params_admissible(f1, f2, a1, a2):
        warnings.warn(f"warp parameters outside the reference ranges: f=({f1}, {f2}), a=({a1}, {a2})",
                      stacklevel=2)
    H, W = img.pixels.shape
    j, k = np.meshgrid(np.arange(H, dtype=float), np.arange(W, dtype=float), indexing="ij")
    row = np.clip(j + a1 * np.sin(2 * np.pi * f1 * k / W), 0, H - 1)
    col = np.clip(k + a2 * np.cos(2 * np.pi * f2 * j / W), 0, W - 1)
    out = biquadratic_sample(img.pixels, row, col)
    return GridImage(np.maximum(out, 0.0))


def warp_params_admissible(f1, f2, a1, a2) -> bool:
    lo, hi = WARP_FREQ_RANGE
    alo, ahi = WARP_AMP_RANGE
    return (lo <= f1 <= hi and lo <= f2 <= hi and alo <= a1 <= ahi and alo <= a2 <= ahi)
