"""Seeded dataset generators, templates and on-disk dataset layout.

Every generator takes an integer ``seed``; streams come from
:func:`nrcdt.rng.rng_for` with keys ``(0, class)`` for templates and
``(1, class, index)`` for samples.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .directions import quaternion_to_matrix
from .io import DataError, read_idx, read_pgm, load_pointcloud, load_rotations_csv, write_pgm, \
    write_pointcloud_csv, IDX_IMAGES, IDX_LABELS
from .measures import (AffineMap, GridImage, PointCloud, SupportError, apply_affine_image,
                       apply_affine_points, bilinear_sample, rotation2d, warp_image)
from .rng import derive_seed, rng_for

MAX_TRIES = 100
TEMPLATE_SIZE = 256

# stream roles for SeedSequence spawn keys
_TEMPLATE, _SAMPLE, _SOURCE = 0, 1, 2


@dataclass
class LabeledSet:
    items: list
    labels: np.ndarray
    provenance: dict = field(default_factory=dict)
    templates: list | None = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        if len(self.items) != len(self.labels):
            raise ValueError("items and labels differ in length")
        if len(self.labels) and self.labels.min() < 0:
            raise ValueError("labels must be nonnegative")

    def __len__(self):
        return len(self.items)

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def subset(self, idx) -> "LabeledSet":
        idx = list(idx)
        return LabeledSet([self.items[i] for i in idx], self.labels[idx], dict(self.provenance),
                          self.templates)


# --- shapes -------------------------------------------------------------------


def regular_polygon(n: int, radius: float = 0.3, phase: float = math.pi / 2) -> np.ndarray:
    a = phase + 2 * np.pi * np.arange(n) / n
    return radius * np.column_stack([np.cos(a), np.sin(a)])


def star_polygon(points: int, radius: float = 0.3, inner: float = 0.5, phase: float = math.pi / 2) -> np.ndarray:
    a = phase + np.pi * np.arange(2 * points) / points
    r = np.where(np.arange(2 * points) % 2 == 0, radius, inner * radius)
    return np.column_stack([r * np.cos(a), r * np.sin(a)])


def rasterize(rings, size: int = TEMPLATE_SIZE, supersample: int = 4) -> GridImage:
    """Even-odd fill of polygon rings on the centered grid, antialiased by supersampling."""
    h = math.sqrt(2.0) / size
    off = ((np.arange(supersample) + 0.5) / supersample - 0.5) * h
    centers = (np.arange(size) + 0.5 - size / 2) * h
    xs = (centers[:, None] + off[None, :]).ravel()
    ys = -xs
    px, py = np.meshgrid(xs, ys)
    inside = np.zeros(px.shape, dtype=bool)
    for ring in rings:
        ring = np.asarray(ring, dtype=float)
        for (x0, y0), (x1, y1) in zip(ring, np.roll(ring, -1, axis=0)):
            if y0 == y1:
                continue
            cross = (y0 > py) != (y1 > py)
            xint = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
            inside ^= cross & (px < xint)
    cov = inside.reshape(size, supersample, size, supersample).mean(axis=(1, 3))
    return GridImage(cov)


def _circle(r, n=96):
    return regular_polygon(n, r, 0.0)


ACADEMIC_SHAPES = ("cross", "annulus", "triangle-hole")
POLYGON_SHAPES = ("triangle", "square", "pentagon", "hexagon",
                  "star4", "star5", "star6", "star7", "star8")


def shape_rings(name: str):
    if name == "cross":
        w, L = 0.081, 0.288
        return [np.array([(w, w), (L, w), (L, -w), (w, -w), (w, -L), (-w, -L), (-w, -w), (-L, -w),
                          (-L, w), (-w, w), (-w, L), (w, L)])]
    if name == "annulus":
        # off-center hole: no rotational symmetry
        return [_circle(0.24), _circle(0.12) + np.array([0.08, 0.0])]
    if name == "triangle-hole":
        return [regular_polygon(3, 0.352), _circle(0.072) + np.array([0.0, 0.04])]
    sides = {"triangle": 3, "square": 4, "pentagon": 5, "hexagon": 6}
    if name in sides:
        return [regular_polygon(sides[name], 0.3)]
    if name.startswith("star") and name[4:].isdigit():
        return [star_polygon(int(name[4:]), 0.3)]
    raise ValueError(f"unknown shape {name!r}")


@lru_cache(maxsize=32)
def template_image(name: str, size: int = TEMPLATE_SIZE) -> GridImage:
    return rasterize(shape_rings(name), size)


# --- affine image classes -----------------------------------------------------


@dataclass(frozen=True)
class AffineRanges:
    """Uniform parameter ranges.  Shifts in pixels, angles in degrees."""

    shift: tuple = (-40.0, 40.0)
    rotation: tuple = (0.0, 360.0)
    scale: tuple = (0.75, 1.0)
    shear: tuple = (-30.0, 30.0)
    snap_rotation: int | None = None

    def as_dict(self):
        return {"shift": list(self.shift), "rotation": list(self.rotation), "scale": list(self.scale),
                "shear": list(self.shear), "snap_rotation": self.snap_rotation}


ACADEMIC_RANGES = AffineRanges()
POLYGON_RANGES = AffineRanges(shift=(-20.0, 20.0), scale=(0.5, 1.25))
LINMNIST_RANGES = AffineRanges(shift=(-20.0, 20.0), scale=(0.5, 1.25), shear=(0.0, 0.0))
IDENTITY_RANGES = AffineRanges(shift=(0.0, 0.0), rotation=(0.0, 0.0), scale=(1.0, 1.0), shear=(0.0, 0.0))


def _uniform(rng, rng_range, size=None):
    lo, hi = rng_range
    return rng.uniform(lo, hi, size)


def draw_affine_2d(rng, ranges: AffineRanges, pitch: float):
    """Draw ``A = Rot @ Shear @ Scale`` and a shift; returns ``(AffineMap, record)``."""
    sx, sy = _uniform(rng, ranges.scale, 2)
    phi = math.radians(_uniform(rng, ranges.shear))
    if ranges.snap_rotation:
        k = int(rng.integers(ranges.snap_rotation))
        angle = 2 * math.pi * k / ranges.snap_rotation
    else:
        angle = math.radians(_uniform(rng, ranges.rotation))
    shift = _uniform(rng, ranges.shift, 2)
    A = rotation2d(angle) @ np.array([[1.0, math.tan(phi)], [0.0, 1.0]]) @ np.diag([sx, sy])
    y = shift * pitch
    rec = {"scale": [float(sx), float(sy)], "shear_deg": math.degrees(phi), "rotation_rad": angle,
           "shift_px": shift.tolist(), "A": A.tolist(), "y": y.tolist()}
    return AffineMap(A, y), rec


@dataclass(frozen=True)
class WarpRanges:
    freq: tuple = (1.5, 2.5)
    amp: tuple = (0.5, 2.0)


def gen_affine_image_class(template: GridImage, n: int, ranges: AffineRanges = ACADEMIC_RANGES,
                           warp: WarpRanges | None = None, seed: int = 0, label: int = 0) -> LabeledSet:
    """``n`` random affine copies of ``template``, optionally warped first.

    Sample ``i`` uses the substream ``(1, label, i)``.  A draw whose image
    leaves the support frame is redrawn from the same stream, at most
    ``MAX_TRIES`` times.
    """
    if abs(template.mass - 1.0) > 1e-9:
        raise ValueError("template must be normalized")
    items, records = [], []
    for i in range(n):
        rng = rng_for(seed, _SAMPLE, label, i)
        for tries in range(1, MAX_TRIES + 1):
            rec = {"tries": tries}
            src = template
            if warp is not None:
                f1, f2 = _uniform(rng, warp.freq, 2)
                a1, a2 = _uniform(rng, warp.amp, 2)
                src = warp_image(template, f1, f2, a1, a2)
                rec["warp"] = [float(f1), float(f2), float(a1), float(a2)]
            amap, arec = draw_affine_2d(rng, ranges, template.pitch)
            rec.update(arec)
            try:
                img = apply_affine_image(src, amap, name=f"sample {i} of class {label}")
            except SupportError:
                continue
            break
        else:
            raise SupportError(f"sample {i} of class {label}: support left the frame in {MAX_TRIES} draws")
        items.append(img)
        records.append(rec)
    prov = {"generator": "affine_image_class", "seed": int(seed), "label": int(label),
            "ranges": ranges.as_dict(), "warp": None if warp is None else {"freq": list(warp.freq), "amp": list(warp.amp)},
            "samples": records}
    return LabeledSet(items, np.full(n, label), prov, [template])


def _concat(parts, prov) -> LabeledSet:
    items, labels, templates = [], [], []
    for p in parts:
        items.extend(p.items)
        labels.extend(p.labels.tolist())
        templates.extend(p.templates or [])
    prov["samples"] = [s for p in parts for s in p.provenance.get("samples", [])]
    return LabeledSet(items, np.array(labels, dtype=int), prov, templates)


def gen_image_dataset(shapes, per_class: int, seed: int, ranges: AffineRanges,
                      warp: WarpRanges | None = None, size: int = TEMPLATE_SIZE, name: str = "custom") -> LabeledSet:
    parts = [gen_affine_image_class(template_image(s, size), per_class, ranges, warp, seed, c)
             for c, s in enumerate(shapes)]
    prov = {"generator": name, "seed": int(seed), "shapes": list(shapes), "per_class": per_class,
            "size": size, "ranges": ranges.as_dict(),
            "warp": None if warp is None else {"freq": list(warp.freq), "amp": list(warp.amp)}}
    return _concat(parts, prov)


def gen_academic(classes: int = 3, per_class: int = 10, seed: int = 0, ranges: AffineRanges = ACADEMIC_RANGES,
                 size: int = TEMPLATE_SIZE) -> LabeledSet:
    if not 1 <= classes <= len(ACADEMIC_SHAPES):
        raise ValueError(f"academic dataset has 1 to {len(ACADEMIC_SHAPES)} classes")
    return gen_image_dataset(ACADEMIC_SHAPES[:classes], per_class, seed, ranges, None, size, "academic")


def gen_polygons(classes: int = 9, per_class: int = 10, seed: int = 0, ranges: AffineRanges = POLYGON_RANGES,
                 warp: WarpRanges | None = WarpRanges(), size: int = TEMPLATE_SIZE) -> LabeledSet:
    if not 1 <= classes <= len(POLYGON_SHAPES):
        raise ValueError(f"polygon dataset has 1 to {len(POLYGON_SHAPES)} classes")
    return gen_image_dataset(POLYGON_SHAPES[:classes], per_class, seed, ranges, warp, size, "polygons")


# --- affine point-cloud classes -----------------------------------------------


@dataclass(frozen=True)
class CloudRanges:
    scale: tuple = (0.5, 1.0)
    shear: tuple = (-15.0, 15.0)
    shift: tuple = (-25.0, 25.0)
    rotate: bool = True

    def as_dict(self):
        return {"scale": list(self.scale), "shear": list(self.shear), "shift": list(self.shift),
                "rotate": self.rotate}


def _random_rotation(rng, d):
    if d == 2:
        return rotation2d(rng.uniform(0, 2 * np.pi))
    if d == 3:
        q = rng.standard_normal(4)
        return quaternion_to_matrix(q / np.linalg.norm(q))
    raise ValueError("random rotations are available for d = 2 and d = 3")


def gen_affine_pointcloud_class(template: PointCloud, n: int, ranges: CloudRanges = CloudRanges(),
                                seed: int = 0, label: int = 0) -> LabeledSet:
    """``n`` copies ``A x + y`` of a vector cloud with ``A = Rot @ Shear @ Scale``.

    ``Shear`` is unit upper triangular with ``tan`` of one angle per
    coordinate pair.  Each record stores ``A`` and ``y``.
    """
    if template.is_so3:
        raise ValueError("affine classes need a vector-mode template")
    d = template.dim
    iu = np.triu_indices(d, 1)
    items, records = [], []
    for i in range(n):
        rng = rng_for(seed, _SAMPLE, label, i)
        S = np.diag(_uniform(rng, ranges.scale, d))
        Sh = np.eye(d)
        Sh[iu] = np.tan(np.radians(_uniform(rng, ranges.shear, len(iu[0]))))
        Q = _random_rotation(rng, d) if ranges.rotate else np.eye(d)
        y = _uniform(rng, ranges.shift, d)
        A = Q @ Sh @ S
        items.append(apply_affine_points(template, AffineMap(A, y)))
        records.append({"A": A.tolist(), "y": y.tolist()})
    prov = {"generator": "affine_pointcloud_class", "seed": int(seed), "label": int(label),
            "ranges": ranges.as_dict(), "samples": records}
    return LabeledSet(items, np.full(n, label), prov, [template])


# --- SO(3) --------------------------------------------------------------------


def _haar_matrices(rng, n):
    q = rng.standard_normal((n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return quaternion_to_matrix(q)


def sample_uniform_so3(n: int, seed: int) -> PointCloud:
    """Haar-uniform rotations from normalized Gaussian quaternions."""
    if n < 1:
        raise ValueError("n must be positive")
    return PointCloud(_haar_matrices(rng_for(seed), n))


def sample_matrix_fisher(kappa: float, n: int, seed: int) -> PointCloud:
    """Density proportional to ``exp(kappa tr R)``, by rejection from Haar proposals.

    Proposals come from the same stream as :func:`sample_uniform_so3`;
    acceptance draws from a separate substream, so ``kappa = 0`` reproduces
    the uniform sampler exactly.  Acceptance is about 0.2% at ``kappa = 10``.
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if n < 1:
        raise ValueError("n must be positive")
    prop, acc = rng_for(seed), rng_for(seed, _SOURCE)
    out, have, batch = [], 0, n
    while have < n:
        R = _haar_matrices(prop, batch)
        u = acc.random(batch)
        tr = np.trace(R, axis1=1, axis2=2)
        keep = R[u < np.exp(kappa * (tr - 3.0))]
        out.append(keep[:n - have])
        have += len(out[-1])
        batch = max(n, 4 * batch) if kappa > 0 else n
        batch = min(batch, 1 << 20)
    return PointCloud(np.concatenate(out))


def axis_angle_matrices(axes, angles) -> np.ndarray:
    axes = np.asarray(axes, dtype=float)
    axes = axes / np.linalg.norm(axes, axis=-1, keepdims=True)
    half = 0.5 * np.asarray(angles, dtype=float)
    q = np.concatenate([np.cos(half)[..., None], np.sin(half)[..., None] * axes], axis=-1)
    return quaternion_to_matrix(q)


def sample_equator_rotations(n: int, seed: int) -> PointCloud:
    """Rotations about an axis uniform in the x-y plane, angle uniform on [0, 2 pi)."""
    rng = rng_for(seed)
    phi = rng.uniform(0, 2 * np.pi, n)
    omega = rng.uniform(0, 2 * np.pi, n)
    axes = np.column_stack([np.cos(phi), np.sin(phi), np.zeros(n)])
    return PointCloud(axis_angle_matrices(axes, omega))


def sample_qr_rotations(n: int, seed: int) -> PointCloud:
    """Q factors of Gaussian matrices, signs fixed so R has a positive diagonal, det fixed to +1."""
    G = rng_for(seed).standard_normal((n, 3, 3))
    Q, R = np.linalg.qr(G)
    s = np.sign(np.diagonal(R, axis1=1, axis2=2))
    s[s == 0] = 1.0
    Q = Q * s[:, None, :]
    neg = np.linalg.det(Q) < 0
    Q[neg, :, 2] *= -1
    return PointCloud(Q)


ROTATION_CLASSES = ("matrix-fisher-k10", "equator", "qr-gaussian")


def rotation_templates(n_points: int = 1000, seed: int = 0) -> list:
    s = [derive_seed(seed, _TEMPLATE, c) for c in range(3)]
    return [sample_matrix_fisher(10.0, n_points, s[0]), sample_equator_rotations(n_points, s[1]),
            sample_qr_rotations(n_points, s[2])]


def gen_rotation_dataset(n_per_class: int = 10, n_points: int = 1000, seed: int = 0) -> LabeledSet:
    """Left-rotated copies ``(R .)_# mu_c`` of three SO(3) templates; records store ``R``."""
    templates = rotation_templates(n_points, seed)
    items, labels, records = [], [], []
    for c, tmpl in enumerate(templates):
        for i in range(n_per_class):
            R = _haar_matrices(rng_for(seed, _SAMPLE, c, i), 1)[0]
            items.append(tmpl.rotate_left(R))
            labels.append(c)
            records.append({"R": R.tolist()})
    prov = {"generator": "rotation", "seed": int(seed), "n_per_class": n_per_class, "n_points": n_points,
            "classes": list(ROTATION_CLASSES),
            "equator_interpretation": "axis uniform in the x-y plane, angle uniform on [0, 2pi)",
            "samples": records}
    return LabeledSet(items, np.array(labels), prov, templates)


# --- MNIST-style IDX ----------------------------------------------------------


def _center_resample(digit: np.ndarray, size: int) -> np.ndarray:
    """Bilinear rescale of a square digit to ``size``, shifted so its intensity centroid is central."""
    digit = np.asarray(digit, dtype=float)
    n = digit.shape[0]
    mass = digit.sum()
    if mass <= 0:
        raise DataError("blank image")
    rr, cc = np.indices(digit.shape)
    r0, c0 = (digit * rr).sum() / mass, (digit * cc).sum() / mass
    step = n / size
    grid = (np.arange(size) - (size - 1) / 2) * step
    R, C = np.meshgrid(r0 + grid, c0 + grid, indexing="ij")
    return np.clip(bilinear_sample(digit, R, C), 0.0, None)


def load_idx(images_path, labels_path, classes=None, size: int = 128, limit: int | None = None) -> LabeledSet:
    """Read an IDX image/label pair, keep ``classes`` and rescale to ``size``.

    Labels are re-indexed to ``0..len(classes)-1`` in the order given.
    """
    imgs = read_idx(images_path, IDX_IMAGES)
    labs = read_idx(labels_path, IDX_LABELS)
    if imgs.ndim != 3 or labs.ndim != 1 or imgs.shape[0] != labs.shape[0]:
        raise DataError("image and label files do not match")
    if classes is None:
        classes = sorted(set(labs.tolist()))
    classes = list(classes)
    if not classes:
        raise ValueError("empty class subset")
    lookup = {c: k for k, c in enumerate(classes)}
    items, labels, src = [], [], []
    for idx, (img, lab) in enumerate(zip(imgs, labs)):
        if int(lab) not in lookup:
            continue
        if limit is not None and len(items) >= limit:
            break
        items.append(GridImage(_center_resample(img, size)))
        labels.append(lookup[int(lab)])
        src.append(idx)
    prov = {"generator": "idx", "images": str(images_path), "labels": str(labels_path),
            "classes": classes, "size": size, "source_index": src}
    return LabeledSet(items, np.array(labels, dtype=int), prov)


def gen_linmnist(source: LabeledSet, per_class: int, seed: int,
                 ranges: AffineRanges = LINMNIST_RANGES) -> LabeledSet:
    """Random affine copies of digits; sample ``i`` of class ``c`` draws its digit from substream ``(2, c, i)``."""
    by_class = {}
    for idx, lab in enumerate(source.labels.tolist()):
        by_class.setdefault(lab, []).append(idx)
    parts = []
    for c in sorted(by_class):
        items, records = [], []
        for i in range(per_class):
            j = by_class[c][int(rng_for(seed, _SOURCE, c, i).integers(len(by_class[c])))]
            one = gen_affine_image_class(source.items[j], 1, ranges, None, seed * 1000003 + j, c)
            items.extend(one.items)
            records.append(dict(one.provenance["samples"][0], source=j))
        parts.append(LabeledSet(items, np.full(per_class, c), {"samples": records}, []))
    prov = {"generator": "linmnist", "seed": int(seed), "per_class": per_class, "ranges": ranges.as_dict(),
            "source": {k: v for k, v in source.provenance.items() if k != "source_index"}}
    return _concat(parts, prov)


# --- on-disk layout -----------------------------------------------------------

MANIFEST = "manifest.json"


def _item_kind(item) -> str:
    if isinstance(item, GridImage):
        return "image"
    return "so3" if item.is_so3 else "pointcloud"


def _write_item(path: Path, item):
    if isinstance(item, GridImage):
        write_pgm(path, item.pixels)
    else:
        write_pointcloud_csv(path, item)


def _read_item(path: Path, kind: str):
    if kind == "image":
        return GridImage(read_pgm(path))
    if kind == "so3":
        return load_rotations_csv(path)
    return load_pointcloud(path)


def write_dataset(ls: LabeledSet, out_dir) -> Path:
    """Write ``manifest.json`` plus one PGM (images) or CSV (clouds) per item."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kind = _item_kind(ls.items[0])
    ext = ".pgm" if kind == "image" else ".csv"
    files = []
    for i, item in enumerate(ls.items):
        name = f"item_{i:05d}{ext}"
        _write_item(out / name, item)
        files.append(name)
    tfiles = []
    if ls.templates:
        (out / "templates").mkdir(exist_ok=True)
        for c, t in enumerate(ls.templates):
            name = f"templates/class_{c:03d}{ext}"
            _write_item(out / name, t)
            tfiles.append(name)
    manifest = {"kind": kind, "provenance": ls.provenance, "labels": ls.labels.tolist(),
                "items": files, "templates": tfiles}
    (out / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return out / MANIFEST


def manifest_hash(data_dir) -> str:
    path = Path(data_dir) / MANIFEST
    if not path.exists():
        raise DataError(f"{path}: no manifest")
    return hashlib.sha256(path.read_bytes()).hexdigest()


def read_dataset(data_dir) -> LabeledSet:
    root = Path(data_dir)
    path = root / MANIFEST
    if not path.exists():
        raise DataError(f"{path}: no manifest")
    try:
        manifest = json.loads(path.read_text())
        kind = manifest["kind"]
        files, labels = manifest["items"], manifest["labels"]
    except (json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"{path}: malformed manifest ({exc})") from None
    if len(files) != len(labels):
        raise DataError(f"{path}: item and label counts differ")
    items = [_read_item(root / f, kind) for f in files]
    templates = [_read_item(root / f, kind) for f in manifest.get("templates", [])] or None
    return LabeledSet(items, np.array(labels, dtype=int), manifest.get("provenance", {}), templates)
