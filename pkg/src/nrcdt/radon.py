"""Slicing operators and restricted Radon transforms of point clouds and images."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .directions import DirectionSet
from .measures import GridImage, Measure1D, PointCloud

SLICER_KINDS = ("linear", "circular", "so3")
DEFAULT_RADII = 850


@dataclass(frozen=True)
class Slicer:
    kind: str
    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        object.__setattr__(self, "theta", theta)
        if self.kind == "linear":
            if theta.ndim != 1 or abs(np.linalg.norm(theta) - 1) > 1e-12:
                raise ValueError("linear slicer needs a unit vector")
        elif self.kind == "circular":
            if theta.ndim != 1:
                raise ValueError("circular slicer needs a center vector")
        elif self.kind == "so3":
            if (theta.shape != (3, 3) or np.abs(theta.T @ theta - np.eye(3)).max() > 1e-12
                    or abs(np.linalg.det(theta) - 1) > 1e-12):
                raise ValueError("so3 slicer needs a rotation matrix")
        else:
            raise ValueError(f"unknown slicer kind {self.kind!r}")


def _slice_many(points: np.ndarray, kind: str, thetas: np.ndarray) -> np.ndarray:
    """Slice values, shape ``(K, n)``, of K points against n directions."""
    if kind == "linear":
        return points @ thetas.T
    if kind == "circular":
        diff = points[:, None, :] - thetas[None, :, :]
        return np.sqrt(np.einsum("knd,knd->kn", diff, diff))
    if kind == "so3":
        tr = np.einsum("kij,nij->kn", points, thetas)
        return np.arccos(np.clip((tr - 1) / 2, -1.0, 1.0))
    raise ValueError(f"unknown slicer kind {kind!r}")


def _check_compatible(points: np.ndarray, kind: str, thetas: np.ndarray):
    if kind == "so3":
        if points.shape[1:] != (3, 3) or thetas.shape[1:] != (3, 3):
            raise ValueError("so3 slicing needs rotation matrices on both sides")
    elif points.ndim != 2 or thetas.ndim != 2 or points.shape[1] != thetas.shape[1]:
        raise ValueError("point and direction dimensions do not match")


def slice_point(x, s: Slicer) -> float:
    x = np.asarray(x, dtype=float)
    _check_compatible(x[None], s.kind, s.theta[None])
    return float(_slice_many(x[None], s.kind, s.theta[None])[0, 0])


@dataclass(frozen=True)
class ProjectionFamily:
    """One projected 1-D measure per direction, in direction order."""

    directions: DirectionSet
    projections: tuple
    n_radii: int | None = None

    def __post_init__(self):
        if len(self.projections) != len(self.directions):
            raise ValueError("need exactly one projection per direction")

    def __len__(self):
        return len(self.projections)

    def to_csv(self) -> str:
        lines = ["direction,atom,weight\n"]
        for i, m in enumerate(self.projections):
            lines.extend(f"{i},{a!r},{w!r}\n" for a, w in zip(m.atoms.tolist(), m.weights.tolist()))
        return "".join(lines)


def project_point_values(cloud: PointCloud, directions: DirectionSet, kind: str = "linear",
                         centers=None, radius: float = 1.0) -> np.ndarray:
    """Raw slice values ``phi(x_k, theta_i)``, shape ``(K, n)``."""
    if kind not in SLICER_KINDS:
        raise ValueError(f"unknown slicer kind {kind!r}")
    thetas = directions.directions
    if kind == "circular":
        thetas = radius * thetas if centers is None else np.asarray(centers, dtype=float)
    elif kind == "so3" and directions.kind != "so3":
        raise ValueError("so3 slicing needs an so3 direction set")
    elif kind == "linear" and directions.kind == "so3":
        raise ValueError("linear slicing needs unit-vector directions")
    _check_compatible(cloud.points, kind, thetas)
    return _slice_many(cloud.points, kind, thetas)


def project_points(cloud: PointCloud, directions: DirectionSet, kind: str = "linear",
                   centers=None, radius: float = 1.0) -> ProjectionFamily:
    """Exact restricted Radon transforms ``sum_k w_k delta_{phi(x_k, theta)}``.

    For ``kind="circular"`` the circle centers are ``centers`` if given,
    else ``radius`` times the direction vectors.
    """
    vals = project_point_values(cloud, directions, kind, centers, radius)
    projs = tuple(Measure1D(vals[:, i], cloud.weights) for i in range(vals.shape[1]))
    return ProjectionFamily(directions, projs)


def project_at(cloud: PointCloud, s: Slicer) -> Measure1D:
    _check_compatible(cloud.points, s.kind, s.theta[None])
    return Measure1D(_slice_many(cloud.points, s.kind, s.theta[None])[:, 0], cloud.weights)


# --- images -----------------------------------------------------------------


def _uniform_sum_cdf(u, a, b):
    """CDF at ``u`` of ``U(-a/2, a/2) + U(-b/2, b/2)`` with ``a >= b >= 0``.

    Times the pixel area this is the area of a pixel square below the
    line ``<x, theta> = <c, theta> + u``.
    """
    u = np.asarray(u, dtype=float)
    if b <= 1e-12 * a:
        return np.clip(u / a + 0.5, 0.0, 1.0)
    lo, mid = 0.5 * (a + b), 0.5 * (a - b)
    out = np.zeros_like(u)
    left = (u > -lo) & (u <= -mid)
    out = np.where(left, (u + lo) ** 2 / (2 * a * b), out)
    centre = (u > -mid) & (u <= mid)
    out = np.where(centre, (u + 0.5 * a) / a, out)
    right = (u > mid) & (u < lo)
    out = np.where(right, 1.0 - (lo - u) ** 2 / (2 * a * b), out)
    return np.where(u >= lo, 1.0, out)


def _stripe_masses_exact(xs, ys, vals, area, h, angle, R):
    c, s = math.cos(angle), math.sin(angle)
    proj = xs * c + ys * s
    a, b = h * abs(c), h * abs(s)
    if a < b:
        a, b = b, a
    half = 0.5 * (a + b)
    width = 2.0 / R
    i_lo = np.floor((proj - half + 1.0) / width).astype(int)
    i_hi = np.floor((proj + half + 1.0) / width).astype(int)
    out = np.zeros(R)
    for k in range(int((i_hi - i_lo).max()) + 1):
        i = i_lo + k
        edge = -1.0 + i * width
        frac = _uniform_sum_cdf(edge + width - proj, a, b) - _uniform_sum_cdf(edge - proj, a, b)
        ok = (i <= i_hi) & (i >= 0) & (i < R)
        out += np.bincount(i[ok], weights=vals[ok] * area * frac[ok], minlength=R)
    return out


def clip_halfplane(poly, normal, offset, keep_below=True):
    """Sutherland-Hodgman clip of a convex polygon against ``<x, normal> <= offset``.

    With ``keep_below=False`` the kept side is ``<x, normal> >= offset``.
    """
    sign = 1.0 if keep_below else -1.0
    out = []
    n = len(poly)
    for idx in range(n):
        p, q = poly[idx], poly[(idx + 1) % n]
        dp = sign * (p[0] * normal[0] + p[1] * normal[1] - offset)
        dq = sign * (q[0] * normal[0] + q[1] * normal[1] - offset)
        if dp <= 0:
            out.append(p)
        if (dp < 0 < dq) or (dq < 0 < dp):
            t = dp / (dp - dq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def polygon_area(poly) -> float:
    if len(poly) < 3:
        return 0.0
    acc = 0.0
    for (x0, y0), (x1, y1) in zip(poly, poly[1:] + poly[:1]):
        acc += x0 * y1 - x1 * y0
    return abs(acc) / 2


def _stripe_masses_clip(xs, ys, vals, h, angle, R):
    normal = (math.cos(angle), math.sin(angle))
    width = 2.0 / R
    out = np.zeros(R)
    for x, y, v in zip(xs.tolist(), ys.tolist(), vals.tolist()):
        sq = [(x - h / 2, y - h / 2), (x + h / 2, y - h / 2), (x + h / 2, y + h / 2), (x - h / 2, y + h / 2)]
        proj = [px * normal[0] + py * normal[1] for px, py in sq]
        i0 = max(int(math.floor((min(proj) + 1) / width)), 0)
        i1 = min(int(math.floor((max(proj) + 1) / width)), R - 1)
        for i in range(i0, i1 + 1):
            lo = -1.0 + i * width
            piece = clip_halfplane(clip_halfplane(sq, normal, lo, keep_below=False), normal, lo + width)
            out[i] += v * polygon_area(piece)
    return out


def _stripe_masses_supersample(xs, ys, vals, area, h, angle, R, k):
    off = (np.arange(k) + 0.5) / k - 0.5
    ox, oy = np.meshgrid(off * h, off * h)
    px = xs[:, None] + ox.ravel()[None, :]
    py = ys[:, None] + oy.ravel()[None, :]
    t = px * math.cos(angle) + py * math.sin(angle)
    idx = np.clip(np.floor((t + 1.0) * R / 2).astype(int), 0, R - 1)
    w = np.repeat(vals * area / (k * k), k * k)
    return np.bincount(idx.ravel(), weights=w, minlength=R)


def stripe_masses(img: GridImage, angles, n_radii: int = DEFAULT_RADII, method: str = "exact",
                  k: int = 32) -> np.ndarray:
    """Mass of the image inside each stripe, shape ``(len(angles), n_radii)``.

    Stripe ``i`` at angle ``theta`` is ``{x : -1 + 2i/R <= <x, theta> < -1 + 2(i+1)/R}``.
    ``method`` is ``"exact"`` (closed-form square/slab area, vectorized),
    ``"clip"`` (explicit polygon clipping, slow) or ``"supersample"``
    (``k x k`` sub-pixels, an approximation kept for cross-checks).
    """
    R = int(n_radii)
    if R < 2:
        raise ValueError("need at least two radii")
    x, y = img.centers()
    m = img.pixels > 0
    xs, ys, vals = x[m], y[m], img.pixels[m]
    h, area = img.pitch, img.pixel_area
    rows = []
    for ang in np.atleast_1d(np.asarray(angles, dtype=float)):
        if method == "exact":
            rows.append(_stripe_masses_exact(xs, ys, vals, area, h, ang, R))
        elif method == "clip":
            rows.append(_stripe_masses_clip(xs, ys, vals, h, ang, R))
        elif method == "supersample":
            rows.append(_stripe_masses_supersample(xs, ys, vals, area, h, ang, R, k))
        else:
            raise ValueError(f"unknown stripe method {method!r}")
    return np.array(rows)


def stripe_centers(n_radii: int) -> np.ndarray:
    R = int(n_radii)
    return -1.0 + (2 * np.arange(R) + 1) / R


def project_image(img: GridImage, angles: DirectionSet, n_radii: int = DEFAULT_RADII,
                  method: str = "exact") -> ProjectionFamily:
    """Stripe-discretized Radon projections of a normalized image."""
    if angles.kind != "circle":
        raise ValueError("image projections need a circle direction set")
    if abs(img.mass - 1.0) > 1e-9:
        raise ValueError(f"image is not normalized (mass {img.mass!r})")
    masses = stripe_masses(img, angles.angles, n_radii, method)
    t = stripe_centers(n_radii)
    projs = tuple(Measure1D(t, row, normalize=True) for row in masses)
    return ProjectionFamily(angles, projs, n_radii=int(n_radii))
