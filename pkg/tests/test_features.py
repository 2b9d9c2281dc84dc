import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nrcdt.cdt import QuantileGrid, cdt_sample
from nrcdt.datasets import _circle, rasterize
from nrcdt.directions import DirectionSet, equispaced_s1, fibonacci_s2
from nrcdt.features import (FeatureMatrix, feature_pipeline, features_to_csv, h_reduce,
                            normalize_family, rcdt_flatten, standardize_columns, tv_reduce)
from nrcdt.measures import (AffineMap, DegenerateError, GridImage, PointCloud, apply_affine_image,
                            apply_affine_points, rotation2d)
from nrcdt.radon import project_points

from conftest import random_cloud


def disk_image(n=128, radius=0.3):
    h = np.sqrt(2) / n
    c = (np.arange(n) + 0.5 - n / 2) * h
    X, Y = np.meshgrid(c, c)
    return GridImage((X ** 2 + Y ** 2 <= radius ** 2).astype(float))


def matrix(rows, n_theta=None):
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    return FeatureMatrix(rows, equispaced_s1(n_theta or rows.shape[1]))


def test_standardize_example():
    out = standardize_columns(np.array([[0.0], [1.0], [2.0]]))
    assert np.allclose(out[:, 0], [-1.2247449, 0, 1.2247449], atol=1e-7)


def test_line_cloud_is_degenerate():
    cloud = PointCloud(np.column_stack([np.linspace(-0.5, 0.5, 9), np.zeros(9)]))
    fam = project_points(cloud, equispaced_s1(4))
    with pytest.raises(DegenerateError, match="degenerate projection: support on a hyperplane"):
        normalize_family(fam, QuantileGrid(32))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_normalized_columns_have_zero_mean_unit_std(seed):
    rng = np.random.default_rng(seed)
    fam = project_points(random_cloud(rng, weighted=True), equispaced_s1(7))
    V = normalize_family(fam, QuantileGrid(128)).values
    assert np.abs(V.mean(axis=0)).max() <= 1e-10
    assert np.abs(V.std(axis=0) - 1).max() <= 1e-8


def test_reduction_examples():
    fm = matrix([[1.0, -1.0]])
    got = {v: h_reduce(fm, v).values[0] for v in ("max", "ha", "hb", "hc", "hd")}
    assert got == {"max": 1.0, "ha": 1.0, "hb": 1.0, "hc": 0.0, "hd": 2.0}
    assert tv_reduce(fm).values[0] == 4.0


def test_identical_columns():
    col = np.array([-1.0, 0.2, 0.9])
    fm = matrix(np.tile(col[:, None], 5))
    assert np.all(h_reduce(fm, "hd").values == 0)
    assert np.array_equal(h_reduce(fm, "max").values, col)
    assert np.all(tv_reduce(fm).values == 0)


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 12))
def test_reduction_orderings(seed, n_theta):
    V = np.random.default_rng(seed).normal(size=(6, n_theta))
    fm = matrix(V)
    ha, hb, hc = (h_reduce(fm, v).values for v in ("ha", "hb", "hc"))
    mx, hd, tv = h_reduce(fm, "max").values, h_reduce(fm, "hd").values, tv_reduce(fm).values
    assert np.all(hb <= ha) and np.all(mx <= ha)
    assert np.allclose(hc, ha - hb) and np.all(hc >= 0) and np.all(hd >= 0)
    assert np.all(tv >= 2 * (V.max(axis=1) - V.min(axis=1)) - 1e-12)


def test_tv_uses_angle_order():
    angles = np.array([np.pi, 0.0, np.pi / 2])
    D = DirectionSet("circle", np.column_stack([np.cos(angles), np.sin(angles)]), angles)
    fm = FeatureMatrix(np.array([[2.0, 0.0, 1.0]]), D)
    # sorted by angle the row is [0, 1, 2]
    assert tv_reduce(fm).values[0] == 4.0


def test_tv_rejects_sphere_directions():
    fm = FeatureMatrix(np.zeros((3, 4)), fibonacci_s2(4))
    with pytest.raises(ValueError):
        tv_reduce(fm)
    with pytest.raises(ValueError):
        feature_pipeline(PointCloud(np.eye(3)), "tv", fibonacci_s2(4), grid=QuantileGrid(8))


def test_unknown_variant():
    with pytest.raises(ValueError):
        h_reduce(matrix([[0.0]]), "he")


def test_rcdt_single_direction(rng):
    cloud = random_cloud(rng)
    fam = project_points(cloud, equispaced_s1(1))
    g = QuantileGrid(50)
    assert np.array_equal(rcdt_flatten(fam, g).values, cdt_sample(fam.projections[0], g))


def test_rcdt_translation_and_length(rng):
    cloud = random_cloud(rng)
    D, g = equispaced_s1(6), QuantileGrid(40)
    y = np.array([0.3, -0.2])
    base = rcdt_flatten(project_points(cloud, D), g).values.reshape(6, 40)
    moved = rcdt_flatten(project_points(apply_affine_points(cloud, AffineMap(np.eye(2), y)), D), g)
    assert len(moved) == 6 * 40
    shift = D.directions @ y
    assert np.abs(moved.values.reshape(6, 40) - base - shift[:, None]).max() <= 1e-12


def test_pipeline_rcdt_matches_flatten(rng):
    cloud = random_cloud(rng)
    D, g = equispaced_s1(5), QuantileGrid(30)
    a = feature_pipeline(cloud, "rcdt", D, grid=g).values
    b = rcdt_flatten(project_points(cloud, D), g).values
    assert np.array_equal(a, b)


def test_eucl_flattens_raw_data():
    img = GridImage(np.arange(1.0, 7.0).reshape(2, 3))
    v = feature_pipeline(img, "eucl")
    assert v.variant == "eucl-flat" and np.array_equal(v.values, img.pixels.ravel())


def test_disk_scaling_invariance():
    # reference resolution; error measured in the L2 norm over the quantile grid
    D, g = equispaced_s1(16), QuantileGrid(256)
    img = rasterize([_circle(0.3, 256)], 256)
    small = apply_affine_image(img, AffineMap(0.8 * np.eye(2)))
    a = feature_pipeline(img, "mnrcdt", D, 850, g).values
    b = feature_pipeline(small, "mnrcdt", D, 850, g).values
    assert np.sqrt(np.mean((a - b) ** 2)) <= 1e-3


def test_disk_hd_vanishes_at_quarter_turns():
    v = feature_pipeline(disk_image(64), "hd", equispaced_s1(4), 200, QuantileGrid(128)).values
    assert np.abs(v).max() <= 1e-6


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 31), st.floats(0.3, 3.0))
def test_grid_rotation_invariance(seed, k, s):
    rng = np.random.default_rng(seed)
    cloud = random_cloud(rng, weighted=True)
    D, g = equispaced_s1(32), QuantileGrid(200)
    amap = AffineMap(s * rotation2d(2 * np.pi * k / 32), rng.normal(size=2))
    a = feature_pipeline(cloud, "mnrcdt", D, grid=g).values
    b = feature_pipeline(apply_affine_points(cloud, amap), "mnrcdt", D, grid=g).values
    assert np.abs(a - b).max() <= 1e-9


def test_symmetric_cloud_has_zero_hd():
    ang = 2 * np.pi * np.arange(8) / 8
    ring = np.column_stack([np.cos(ang), np.sin(ang)])
    cloud = PointCloud(np.vstack([ring, 0.4 * ring @ rotation2d(0.3).T]))
    v = feature_pipeline(cloud, "hd", equispaced_s1(8), grid=QuantileGrid(100)).values
    assert np.abs(v).max() <= 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 40))
def test_inf_sup_identity(seed, half):
    rng = np.random.default_rng(seed)
    cloud = random_cloud(rng, weighted=True)
    D, g = equispaced_s1(2 * half), QuantileGrid(99)
    V = normalize_family(project_points(cloud, D), g).values
    assert np.abs(V.min(axis=1) + V.max(axis=1)[::-1]).max() <= 1e-9


def test_separability_surrogate():
    rng = np.random.default_rng(8)
    D, g = equispaced_s1(64), QuantileGrid(200)
    templates = [random_cloud(rng, k=60), random_cloud(rng, k=60)]
    feats = []
    for tpl in templates:
        rows = []
        for _ in range(6):
            k = rng.integers(64)
            shear = np.array([[1.0, rng.uniform(-0.2, 0.2)], [0.0, 1.0]])
            A = rng.uniform(0.5, 2.0) * rotation2d(2 * np.pi * k / 64) @ shear
            moved = apply_affine_points(tpl, AffineMap(A, rng.normal(size=2)))
            rows.append(feature_pipeline(moved, "mnrcdt", D, grid=g).values)
        feats.append(np.array(rows))
    diam = max(np.linalg.norm(F[:, None] - F[None], axis=2).max() for F in feats)
    between = np.linalg.norm(feats[0][:, None] - feats[1][None], axis=2).min()
    assert diam < between


def test_csv_header():
    v = h_reduce(matrix([[1.0, -1.0], [2.0, 0.0]]), "hd")
    text = features_to_csv([v, v], labels=[0, 1])
    lines = text.splitlines()
    assert lines[0] == "# method=hd n_theta=2 n_radii=None n_t=2"
    assert lines[1] == "0,2.0,2.0"
