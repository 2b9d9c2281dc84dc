"""NR-CDT features: per-direction standardization and reductions over directions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cdt import QuantileGrid, cdt_matrix, cdt_sample
from .directions import DirectionSet
from .measures import DegenerateError, GridImage, PointCloud
from .radon import DEFAULT_RADII, ProjectionFamily, project_image, project_point_values

STD_GUARD = 1e-10
H_VARIANTS = ("max", "ha", "hb", "hc", "hd")
VARIANTS = H_VARIANTS + ("tv", "rcdt-flat", "eucl-flat")
METHODS = ("eucl", "rcdt", "mnrcdt", "ha", "hb", "hc", "hd", "tv")


@dataclass(frozen=True)
class FeatureMatrix:
    """``values[j, i]`` is the normalized CDT of direction ``i`` at ``t_j``."""

    values: np.ndarray
    directions: DirectionSet
    n_radii: int | None = None

    @property
    def n_t(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    variant: str
    n_theta: int | None = None
    n_radii: int | None = None
    n_t: int | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown feature variant {self.variant!r}")

    def __len__(self):
        return self.values.size

    def header(self) -> str:
        return f"# method={self.variant} n_theta={self.n_theta} n_radii={self.n_radii} n_t={self.n_t}"


def cdt_table(family: ProjectionFamily, grid: QuantileGrid, mode: str = "exact") -> np.ndarray:
    """Unnormalized CDTs, one column per direction, shape ``(n_t, n_theta)``."""
    return np.column_stack([cdt_sample(m, grid, mode) for m in family.projections])


def standardize_columns(table: np.ndarray) -> np.ndarray:
    """``(v - mean) / std`` per column with midpoint-rule moments."""
    table = np.asarray(table, dtype=float)
    mean = table.mean(axis=0)
    centred = table - mean
    std = np.sqrt(np.mean(centred * centred, axis=0))
    if np.any(std < STD_GUARD):
        bad = int(np.argmin(std))
        raise DegenerateError(f"degenerate projection: support on a hyperplane (direction {bad})")
    return centred / std


def normalize_family(family: ProjectionFamily, grid: QuantileGrid, mode: str = "exact") -> FeatureMatrix:
    if len(family) == 0:
        raise ValueError("empty projection family")
    return FeatureMatrix(standardize_columns(cdt_table(family, grid, mode)), family.directions,
                         family.n_radii)


def _meta(fm: FeatureMatrix) -> dict:
    return {"n_theta": len(fm.directions), "n_radii": fm.n_radii, "n_t": fm.n_t}


def h_reduce(fm: FeatureMatrix, variant: str = "max") -> FeatureVector:
    V = fm.values
    if V.size == 0:
        raise ValueError("empty feature matrix")
    A = np.abs(V)
    if variant == "max":
        out = V.max(axis=1)
    elif variant == "ha":
        out = A.max(axis=1)
    elif variant == "hb":
        out = A.min(axis=1)
    elif variant == "hc":
        out = A.max(axis=1) - A.min(axis=1)
    elif variant == "hd":
        out = V.max(axis=1) - V.min(axis=1)
    else:
        raise ValueError(f"unknown h variant {variant!r}")
    return FeatureVector(out, variant, **_meta(fm))


def tv_reduce(fm: FeatureMatrix) -> FeatureVector:
    """Cyclic total variation over the directions, sorted by angle."""
    if fm.directions.kind != "circle":
        raise ValueError("tv reduction is defined for circle directions only")
    V = fm.values[:, np.argsort(fm.directions.angles % (2 * np.pi), kind="stable")]
    out = np.abs(np.diff(V, axis=1, append=V[:, :1])).sum(axis=1)
    return FeatureVector(out, "tv", **_meta(fm))


def rcdt_flatten(family: ProjectionFamily, grid: QuantileGrid, mode: str = "exact") -> FeatureVector:
    """CDT columns concatenated in direction order."""
    table = cdt_table(family, grid, mode)
    return FeatureVector(table.T.ravel(), "rcdt-flat", len(family), family.n_radii, grid.n_t)


def _reduce(fm: FeatureMatrix, method: str) -> FeatureVector:
    if method == "tv":
        return tv_reduce(fm)
    return h_reduce(fm, "max" if method == "mnrcdt" else method)


def feature_pipeline(obj, method: str, directions: DirectionSet | None = None,
                     n_radii: int = DEFAULT_RADII, grid: QuantileGrid | None = None,
                     slicer: str = "linear", centers=None, radius: float = 1.0) -> FeatureVector:
    """Features of a GridImage or PointCloud.

    Images go through stripe projections and the linear-interp CDT, point
    clouds through exact projections and the exact CDT.  ``slicer`` picks
    the slicing operator for vector clouds; SO(3) clouds always use the
    SO(3) slicer.
    """
    if method not in METHODS:
        raise ValueError(f"unknown feature method {method!r}")
    if method == "eucl":
        src = obj.pixels if isinstance(obj, GridImage) else obj.points
        return FeatureVector(np.asarray(src, dtype=float).ravel().copy(), "eucl-flat")
    if directions is None or grid is None:
        raise ValueError(f"method {method!r} needs directions and a quantile grid")
    if method == "tv" and directions.kind != "circle":
        raise ValueError("tv reduction is defined for circle directions only")
    if isinstance(obj, GridImage):
        family = project_image(obj, directions, n_radii)
        if method == "rcdt":
            return rcdt_flatten(family, grid, "linear-interp")
        return _reduce(normalize_family(family, grid, "linear-interp"), method)
    if not isinstance(obj, PointCloud):
        raise TypeError("expected a GridImage or a PointCloud")
    kind = "so3" if obj.is_so3 else slicer
    table = cdt_matrix(project_point_values(obj, directions, kind, centers, radius), obj.weights, grid)
    if method == "rcdt":
        return FeatureVector(table.T.ravel(), "rcdt-flat", len(directions), None, grid.n_t)
    return _reduce(FeatureMatrix(standardize_columns(table), directions), method)


def features_to_csv(vectors, labels=None) -> str:
    """CSV with a header line naming method, n_theta, n_radii and n_t."""
    vectors = list(vectors)
    if not vectors:
        raise ValueError("nothing to export")
    lines = [vectors[0].header() + "\n"]
    for i, v in enumerate(vectors):
        row = [str(labels[i])] if labels is not None else []
        row.extend(repr(float(x)) for x in v.values)
        lines.append(",".join(row) + "\n")
    return "".join(lines)
