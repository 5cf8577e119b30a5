import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import ConvexHull

from swapsim.core import make_rng
from swapsim.hull import PointCloud3, TooFewPointsError, quickhull3, to_off, volume_oracle

CUBE = np.array(list(itertools.product((0.0, 1.0), repeat=3)))
OCTA = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], float)


def test_unit_cube():
    h = quickhull3(CUBE)
    assert h.volume == pytest.approx(1.0, rel=1e-12)
    assert sorted(h.vertices.tolist()) == list(range(8))
    assert len(h.faces) == 12


def test_coplanar_is_degenerate():
    rng = make_rng(3)
    pts = np.column_stack([rng.random(100), rng.random(100), np.zeros(100)])
    h = quickhull3(pts)
    assert h.degenerate and h.volume == 0.0


def test_collinear_and_duplicates():
    assert quickhull3(np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2], [3, 3, 3]], float)).degenerate
    assert quickhull3(np.zeros((5, 3))).degenerate
    h = quickhull3(np.vstack([CUBE, CUBE, CUBE[:3]]))
    assert h.volume == pytest.approx(1.0)


def test_too_few_points():
    with pytest.raises(TooFewPointsError):
        quickhull3(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        PointCloud3([[0.0, 0.0, float("inf")]])


def test_random_tetrahedron():
    rng = make_rng(5)
    corners = rng.normal(size=(4, 3))
    w = rng.dirichlet(np.ones(4), size=996)
    pts = np.vstack([w @ corners, corners])
    exact = abs(np.linalg.det(corners[1:] - corners[0])) / 6.0
    h = quickhull3(pts)
    assert h.volume == pytest.approx(exact, rel=1e-9)
    assert sorted(h.vertices.tolist()) == list(range(996, 1000))


def test_volume_oracle_cube_and_octahedron():
    v, se = volume_oracle(CUBE, 1_000_000, make_rng(0))
    assert v == pytest.approx(1.0, abs=0.005)
    assert se == 0.0 or se < 0.005
    v, _ = volume_oracle(OCTA, 1_000_000, make_rng(1))
    assert v == pytest.approx(4.0 / 3.0, rel=0.01)
    flat = np.column_stack([make_rng(2).random((10, 2)), np.zeros(10)])
    assert volume_oracle(flat, 1000, make_rng(0)) == (0.0, 0.0)


def test_matches_scipy():
    rng = make_rng(9)
    for _ in range(50):
        pts = rng.normal(size=(rng.integers(4, 400), 3)) * rng.uniform(0.1, 10.0, 3)
        assert quickhull3(pts).volume == pytest.approx(ConvexHull(pts).volume, rel=1e-9)


def test_deterministic_output():
    pts = make_rng(4).normal(size=(300, 3))
    a, b = quickhull3(pts), quickhull3(pts)
    assert np.array_equal(a.faces, b.faces) and a.volume == b.volume


def test_faces_outward():
    pts = make_rng(6).normal(size=(200, 3))
    h = quickhull3(pts)
    n, d = h.planes()
    centre = pts[h.vertices].mean(axis=0)
    assert np.all(n @ centre - d < 0.0)


def test_off_export():
    text = to_off(quickhull3(CUBE))
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert lines[0] == "OFF" and lines[1] == "8 12 0"
    assert all(ln.startswith("3 ") for ln in lines[10:])


clouds = st.integers(0, 2**32 - 1).map(
    lambda s: make_rng(s).normal(size=(int(make_rng(s).integers(4, 200)), 3)) * make_rng(s + 1).uniform(0.01, 5.0, 3)
)


@settings(max_examples=100, deadline=None)
@given(clouds)
def test_containment(pts):
    h = quickhull3(pts)
    scale = np.abs(pts).max()
    assert np.all(h.contains(pts, slack=1e-9 * max(scale, 1.0)))


@settings(max_examples=100, deadline=None)
@given(clouds, st.integers(0, 2**32 - 1))
def test_adding_point_never_shrinks(pts, s):
    extra = make_rng(s).normal(size=(1, 3)) * 3.0
    assert quickhull3(np.vstack([pts, extra])).volume >= quickhull3(pts).volume * (1.0 - 1e-12)


@settings(max_examples=100, deadline=None)
@given(clouds, st.integers(0, 2**32 - 1))
def test_rotation_invariance(pts, s):
    q, _ = np.linalg.qr(make_rng(s).normal(size=(3, 3)))
    a = quickhull3(pts).volume
    b = quickhull3(pts @ q.T + make_rng(s).normal(size=3)).volume
    assert b == pytest.approx(a, rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_oracle_agreement(s):
    rng = make_rng(s)
    pts = rng.normal(size=(int(rng.integers(5, 60)), 3))
    h = quickhull3(pts)
    est, se = volume_oracle(pts, 20_000, rng)
    assert abs(est - h.volume) <= 3.0 * se
