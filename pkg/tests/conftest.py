import numpy as np
import pytest

from nrcdt.measures import PointCloud
from nrcdt.rng import rng_for

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def random_cloud(rng, k=None, d=2, weighted=False):
    k = int(rng.integers(20, 200)) if k is None else k
    pts = rng.standard_normal((k, d)) * rng.uniform(0.2, 1.0, d) + rng.uniform(-0.5, 0.5, d)
    w = None
    if weighted:
        w = rng.uniform(0.1, 1.0, k)
        w /= w.sum()
    return PointCloud(pts, w)


@pytest.fixture
def rng():
    return rng_for(12345)
