import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nrcdt.cdt import (QuantileGrid, cdf_eval, cdt_matrix, cdt_sample, interp_quantile,
                       quantile_eval, wasserstein2)
from nrcdt.measures import Measure1D
from nrcdt.radon import stripe_centers


def random_measure(rng, k=5):
    w = rng.random(k) + 0.05
    return Measure1D(rng.normal(size=k), w / w.sum())


def ot_cost_oracle(m1, m2):
    """North-west-corner transport between sorted atoms (optimal in 1-D)."""
    i = j = 0
    a, b = m1.weights.copy(), m2.weights.copy()
    cost = 0.0
    while i < len(a) and j < len(b):
        flow = min(a[i], b[j])
        cost += flow * (m1.atoms[i] - m2.atoms[j]) ** 2
        a[i] -= flow
        b[j] -= flow
        if a[i] <= 1e-15:
            i += 1
        if j < len(b) and b[j] <= 1e-15:
            j += 1
    return np.sqrt(cost)


def test_grid_symmetric_midpoints():
    t = QuantileGrid(7).samples
    assert np.all((t > 0) & (t < 1)) and np.all(np.diff(t) > 0)
    assert np.array_equal(t + t[::-1], np.ones(7))
    with pytest.raises(ValueError):
        QuantileGrid(0)


def test_cdf_examples():
    d0 = Measure1D([0.0])
    assert cdf_eval(d0, -1) == 0 and cdf_eval(d0, 0) == 1
    assert cdf_eval(Measure1D([1.0, 3.0]), 2) == 0.5


@settings(max_examples=30)
@given(st.integers(0, 2 ** 32 - 1))
def test_cdf_monotone_right_continuous(seed):
    rng = np.random.default_rng(seed)
    m = random_measure(rng)
    s = np.sort(rng.normal(size=50) * 2)
    F = [cdf_eval(m, x) for x in s]
    assert np.all(np.diff(F) >= 0)
    for a in m.atoms:
        assert cdf_eval(m, a) == pytest.approx(cdf_eval(m, a + 1e-12))


def test_quantile_examples():
    m = Measure1D([1.0, 3.0])
    assert quantile_eval(m, 0.25) == 1.0
    assert quantile_eval(m, 0.5) == 3.0
    for t in (0.01, 0.5, 0.99):
        assert quantile_eval(Measure1D([2.5]), t) == 2.5


@pytest.mark.parametrize("t", [0.0, 1.0, -0.2, 1.5])
def test_quantile_level_outside_open_interval(t):
    with pytest.raises(ValueError):
        quantile_eval(Measure1D([0.0]), t)


def test_point_mass_cdt_constant():
    g = QuantileGrid(33)
    for mode in ("exact", "linear-interp"):
        assert np.all(cdt_sample(Measure1D([-0.7]), g, mode) == -0.7)


def test_uniform_cdt_is_identity():
    R = 1000
    centres = (stripe_centers(R) + 1) / 2
    m = Measure1D(centres)
    g = QuantileGrid(256)
    assert np.abs(cdt_sample(m, g, "linear-interp") - g.samples).max() <= 1e-12
    assert np.abs(cdt_sample(m, g, "exact") - g.samples).max() <= 1.0 / R


@settings(max_examples=40)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["exact", "linear-interp"]))
def test_cdt_monotone(seed, mode):
    m = random_measure(np.random.default_rng(seed), 8)
    assert np.all(np.diff(cdt_sample(m, QuantileGrid(101), mode)) >= 0)


@settings(max_examples=40)
@given(st.integers(0, 2 ** 32 - 1), st.floats(-5, 5), st.sampled_from([0.25, 0.5, 2.0, 4.0]))
def test_exact_cdt_shift_and_scale(seed, c, s):
    m = random_measure(np.random.default_rng(seed))
    g = QuantileGrid(64)
    base = cdt_sample(m, g)
    assert np.array_equal(cdt_sample(m.pushforward(1.0, c), g), base + c)
    assert np.array_equal(cdt_sample(m.pushforward(s, 0.0), g), s * base)


def test_interp_quantile_inverts_cdf():
    m = Measure1D([0.0, 1.0, 2.0], [0.2, 0.5, 0.3])
    assert interp_quantile(m, np.array([0.2]))[0] == pytest.approx(0.5)
    assert interp_quantile(m, np.array([0.7]))[0] == pytest.approx(1.5)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_cdt_matrix_matches_per_column(seed):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=(9, 4))
    w = rng.random(9)
    w /= w.sum()
    g = QuantileGrid(50)
    table = cdt_matrix(vals, w, g)
    for i in range(4):
        assert np.array_equal(table[:, i], cdt_sample(Measure1D(vals[:, i], w), g))


def test_w2_examples():
    g = QuantileGrid(100)
    assert wasserstein2(Measure1D([0.0]), Measure1D([-2.5]), g) == pytest.approx(2.5, abs=1e-15)
    assert wasserstein2(Measure1D([0.0, 1.0]), Measure1D([2.0, 3.0]), g) == pytest.approx(2.0, abs=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_w2_matches_transport_oracle(seed):
    rng = np.random.default_rng(seed)
    m1, m2 = random_measure(rng), random_measure(rng)
    assert abs(wasserstein2(m1, m2, QuantileGrid(10_000)) - ot_cost_oracle(m1, m2)) <= 1e-3


@settings(max_examples=40)
@given(st.integers(0, 2 ** 32 - 1))
def test_w2_metric_axioms(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_measure(rng) for _ in range(3))
    g = QuantileGrid(200)
    assert wasserstein2(a, a, g) == 0
    assert wasserstein2(a, b, g) == wasserstein2(b, a, g)
    assert wasserstein2(a, c, g) <= wasserstein2(a, b, g) + wasserstein2(b, c, g) + 1e-9


def test_unknown_mode():
    with pytest.raises(ValueError):
        cdt_sample(Measure1D([0.0]), QuantileGrid(4), "spline")
