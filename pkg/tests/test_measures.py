import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nrcdt.measures import (AffineMap, DegenerateError, GridImage, Measure1D, PointCloud,
                            SupportError, apply_affine_image, apply_affine_points, rotation2d,
                            warp_image)


def disk_image(n=32, radius=0.3):
    img = np.zeros((n, n))
    h = np.sqrt(2) / n
    c = (np.arange(n) + 0.5 - n / 2) * h
    X, Y = np.meshgrid(c, c)
    img[X ** 2 + Y ** 2 <= radius ** 2] = 1.0
    return GridImage(img)


def test_rotation_maps_e1_to_e2():
    cloud = PointCloud([[1.0, 0.0]])
    out = apply_affine_points(cloud, AffineMap(rotation2d(np.pi / 2)))
    assert np.allclose(out.points, [[0.0, 1.0]], atol=1e-15)


def test_diagonal_map_with_shift():
    out = apply_affine_points(PointCloud([[1.0, 1.0]]), AffineMap(np.diag([2.0, 3.0]), [1, 1]))
    assert np.array_equal(out.points, [[3.0, 4.0]])


def test_weights_preserved():
    cloud = PointCloud([[0, 0], [1, 2], [3, 1]], [0.2, 0.5, 0.3])
    out = apply_affine_points(cloud, AffineMap([[1, 2], [0, 1]], [4, -1]))
    assert np.array_equal(out.weights, cloud.weights)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_composition_law(seed):
    rng = np.random.default_rng(seed)
    mats = [rng.normal(size=(2, 2)) + 2 * np.eye(2) for _ in range(2)]
    if min(abs(np.linalg.det(M)) for M in mats) < 0.1:
        return
    f = AffineMap(mats[0], rng.normal(size=2))
    g = AffineMap(mats[1], rng.normal(size=2))
    cloud = PointCloud(rng.normal(size=(7, 2)))
    lhs = apply_affine_points(apply_affine_points(cloud, g), f).points
    rhs = apply_affine_points(cloud, f.compose(g)).points
    assert np.abs(lhs - rhs).max() <= 1e-12 * (1 + np.abs(lhs).max())


def test_inverse_roundtrip():
    f = AffineMap([[2.0, 1.0], [0.5, 1.5]], [0.3, -0.7])
    x = np.array([[0.1, 0.2], [-1.0, 3.0]])
    assert np.allclose(f.inverse()(f(x)), x, atol=1e-14)


def test_singular_map_rejected():
    with pytest.raises(DegenerateError):
        AffineMap([[1.0, 2.0], [2.0, 4.0]])


def test_measure_merges_coincident_atoms():
    m = Measure1D([1.0, 1.0], [0.3, 0.7])
    assert m.atoms.tolist() == [1.0]
    assert m.weights.tolist() == pytest.approx([1.0])


def test_measure_sorted_and_validated():
    m = Measure1D([3.0, -1.0, 2.0])
    assert m.atoms.tolist() == [-1.0, 2.0, 3.0]
    with pytest.raises(ValueError):
        Measure1D([0.0, 1.0], [0.5, 0.6])
    with pytest.raises(ValueError):
        Measure1D([0.0, 1.0], [1.5, -0.5])
    with pytest.raises(ValueError):
        Measure1D([])


def test_measure_is_immutable():
    m = Measure1D([0.0, 1.0])
    with pytest.raises(ValueError):
        m.atoms[0] = 5.0


def test_pushforward():
    m = Measure1D([0.0, 1.0], [0.25, 0.75]).pushforward(-2.0, 1.0)
    assert m.atoms.tolist() == [-1.0, 1.0]
    assert m.weights.tolist() == [0.75, 0.25]


def test_pointcloud_rejects_non_rotation():
    bad = np.eye(3)[None].copy()
    bad[0, 0, 0] = -1.0
    with pytest.raises(ValueError):
        PointCloud(bad)


def test_image_normalized_to_unit_mass():
    img = GridImage(np.arange(12.0).reshape(3, 4))
    assert img.mass == pytest.approx(1.0, abs=1e-14)
    assert img.pitch == pytest.approx(np.sqrt(2) / 4)


def test_zero_image_is_degenerate():
    with pytest.raises(DegenerateError):
        GridImage(np.zeros((4, 4)))


def test_grid_centered_row_zero_on_top():
    img = GridImage(np.ones((4, 4)))
    x, y = img.centers()
    assert x.sum() == pytest.approx(0.0, abs=1e-15)
    assert y[0, 0] > y[-1, 0]
    r, c = img.to_index(x, y)
    assert np.allclose(r, np.arange(4)[:, None]) and np.allclose(c, np.arange(4)[None, :])


def test_identity_map_leaves_image_unchanged():
    img = disk_image()
    out = apply_affine_image(img, AffineMap.identity())
    assert np.abs(out.pixels - img.pixels).max() <= 1e-12 * img.pixels.max()


def test_half_turn_of_centered_disk():
    img = disk_image()
    out = apply_affine_image(img, AffineMap(rotation2d(np.pi)))
    assert np.abs(out.pixels - img.pixels).max() <= 1e-6


def test_one_pixel_translation_shifts_pixels():
    img = disk_image(40, 0.25)
    out = apply_affine_image(img, AffineMap(np.eye(2), [img.pitch, 0.0]))
    expected = np.roll(img.pixels, 1, axis=1)
    assert np.abs(out.pixels[1:-1, 1:-1] - expected[1:-1, 1:-1]).max() <= 1e-9


def test_support_leaving_grid_raises():
    img = disk_image()
    with pytest.raises(SupportError):
        apply_affine_image(img, AffineMap(np.eye(2), [0.6, 0.0]))


def test_zero_warp_is_identity():
    img = disk_image()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = warp_image(img, 2.0, 2.0, 0.0, 0.0)
    assert np.abs(out.pixels - img.pixels).max() <= 1e-12 * img.pixels.max()


def test_out_of_range_warp_warns():
    with pytest.warns(UserWarning):
        warp_image(disk_image(), 2.0, 2.0, 0.0, 0.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(1.5, 2.5), st.floats(1.5, 2.5), st.floats(0.5, 2.0), st.floats(0.5, 2.0))
def test_warp_constant_image_stays_constant(f1, f2, a1, a2):
    img = GridImage(np.ones((16, 16)))
    out = warp_image(img, f1, f2, a1, a2)
    assert np.abs(out.pixels - img.pixels).max() <= 1e-12 * img.pixels.max()


@settings(max_examples=25, deadline=None)
@given(st.floats(1.5, 2.5), st.floats(1.5, 2.5), st.floats(0.5, 2.0), st.floats(0.5, 2.0))
def test_warp_output_has_unit_mass(f1, f2, a1, a2):
    out = warp_image(disk_image(), f1, f2, a1, a2)
    assert out.mass == pytest.approx(1.0, abs=1e-12)
    assert out.pixels.min() >= 0
