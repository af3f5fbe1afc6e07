import math

import numpy as np
import pytest
import shapely
from hypothesis import given, settings, strategies as st

from hostcap.errors import AxisMismatch, DegenerateRegion
from hostcap.geometry import (
    EMPTY,
    box,
    contains,
    convex_hull,
    hausdorff,
    hull_from_ring,
    intersect,
    line_interval,
    project_origin,
    ray_exit,
    sample_region,
    translate,
    winding_contains,
)
from hostcap.grid import parse_axes

UNIT = [(0, 0), (1, 0), (1, 1), (0, 1)]


def random_polygon(rng, n=8, centre=(0, 0), spread=1.0):
    pts = rng.normal(size=(n, 2)) * spread + np.asarray(centre)
    return hull_from_ring(pts)


def same_vertices(a, b, tol=1e-9):
    if len(a.vertices) != len(b.vertices):
        return False
    return all(np.min(np.linalg.norm(b.vertices - v, axis=1)) <= tol for v in a.vertices)


polygon_seeds = st.integers(0, 2**32 - 1)


class TestHull:
    @pytest.mark.parametrize("shift", range(4))
    def test_unit_square_any_rotation(self, shift):
        r = hull_from_ring(UNIT[shift:] + UNIT[:shift])
        assert len(r.halfspaces) == 4 and r.area == pytest.approx(1.0)

    def test_edge_midpoint_pruned(self):
        r = hull_from_ring(UNIT + [(0.5, 0.0)])
        assert len(r.vertices) == 4 and len(r.halfspaces) == 4

    def test_collinear_points_rejected(self):
        with pytest.raises(DegenerateRegion):
            hull_from_ring([(0, 0), (1, 1), (2, 2)])
        with pytest.raises(DegenerateRegion):
            hull_from_ring([(0, 0), (1, 1)])

    @settings(max_examples=50)
    @given(seed=polygon_seeds)
    def test_ccw_and_representations_agree(self, seed):
        rng = np.random.default_rng(seed)
        r = random_polygon(rng, 12)
        v = r.vertices
        w = np.roll(v, -1, axis=0)
        u = np.roll(v, -2, axis=0)
        cross = (w[:, 0] - v[:, 0]) * (u[:, 1] - v[:, 1]) - (w[:, 1] - v[:, 1]) * (u[:, 0] - v[:, 0])
        assert np.all(cross > 0)
        assert np.all(r.margins(v) >= -1e-9)
        assert r.area == pytest.approx(shapely.Polygon(v).convex_hull.area, rel=1e-12)

    def test_matches_shapely_hull(self, rng):
        pts = rng.uniform(-3, 3, size=(200, 2))
        ours = convex_hull(pts)
        ref = shapely.MultiPoint(pts).convex_hull
        assert polygon_area_close(ours, ref.area)


def polygon_area_close(ring, area):
    x, y = ring[:, 0], ring[:, 1]
    return math.isclose(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y), area, rel_tol=1e-12)


class TestIntersect:
    def test_idempotent(self, rng):
        a = random_polygon(rng)
        assert same_vertices(intersect(a, a), a)

    def test_half_overlap(self):
        a = hull_from_ring(UNIT)
        b = translate(a, (0.5, 0))
        c = intersect(a, b)
        assert c.area == pytest.approx(0.5)
        assert same_vertices(c, box((0.5, 0), (1, 1)))

    def test_disjoint_is_empty(self):
        a = hull_from_ring(UNIT)
        assert intersect(a, translate(a, (2, 0))) is EMPTY
        assert not EMPTY and EMPTY.area == 0

    def test_axis_mismatch(self):
        a = hull_from_ring(UNIT, parse_axes("b1:P,b2:P"))
        b = hull_from_ring(UNIT, parse_axes("b1:P,b2:Q"))
        with pytest.raises(AxisMismatch):
            intersect(a, b)

    @settings(max_examples=60)
    @given(seed=polygon_seeds)
    def test_commutative_associative_and_shapely(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (random_polygon(rng, 7, rng.uniform(-0.5, 0.5, 2)) for _ in range(3))
        ab, ba = intersect(a, b), intersect(b, a)
        ref = shapely.Polygon(a.vertices).intersection(shapely.Polygon(b.vertices))
        if not ab:
            assert not ba and ref.area < 1e-12
            return
        assert same_vertices(ab, ba)
        assert ab.area == pytest.approx(ref.area, rel=1e-9, abs=1e-12)
        left = intersect(ab, c) if ab else EMPTY
        bc = intersect(b, c)
        right = intersect(a, bc) if bc else EMPTY
        if left and right:
            assert same_vertices(left, right)
        else:
            assert left.area == pytest.approx(right.area, abs=1e-12)


class TestTranslate:
    def test_area_kept(self):
        a = hull_from_ring(UNIT)
        b = translate(a, (1, 0))
        assert b.area == pytest.approx(1.0) and np.allclose(b.vertices, a.vertices + [1, 0])

    def test_identity_and_round_trip(self, rng):
        a = random_polygon(rng)
        assert np.array_equal(translate(a, (0, 0)).vertices, a.vertices)
        d = rng.normal(size=2)
        back = translate(translate(a, d), -d)
        assert np.allclose(back.vertices, a.vertices, atol=1e-12)
        assert np.allclose(back.offsets, a.offsets, atol=1e-12)


class TestContains:
    def test_centroid_vertex_outside(self, rng):
        a = random_polygon(rng)
        c = contains(a, a.centroid)
        assert c.inside and c.margin > 0
        v = a.vertices[0]
        assert contains(a, v).inside and contains(a, v).margin == pytest.approx(0, abs=1e-12)
        n = a.halfspaces[0].normal
        assert not contains(a, v + 1e-3 * np.asarray(n)).inside

    @settings(max_examples=20)
    @given(seed=polygon_seeds)
    def test_halfspaces_agree_with_winding(self, seed):
        rng = np.random.default_rng(seed)
        a = random_polygon(rng, 9)
        lo, hi = a.bbox()
        pts = rng.uniform(lo - 0.5, hi + 0.5, size=(1000, 2))
        by_h = a.margins(pts) >= 0
        by_w = np.array([winding_contains(a.vertices, p) for p in pts])
        assert np.array_equal(by_h, by_w)


class TestProjection:
    def test_inside(self):
        p, d2 = project_origin(box((-1, -1), (1, 1)))
        assert d2 == 0 and np.all(p == 0)

    def test_edge_case(self):
        p, d2 = project_origin(box((1, -1), (2, 1)))
        assert np.allclose(p, (1, 0)) and d2 == pytest.approx(1)

    def test_vertex_case(self):
        p, d2 = project_origin(box((1, 1), (2, 2)))
        assert np.allclose(p, (1, 1)) and d2 == pytest.approx(2)

    @settings(max_examples=30)
    @given(seed=polygon_seeds)
    def test_matches_shapely_distance(self, seed):
        rng = np.random.default_rng(seed)
        a = random_polygon(rng, 8, rng.uniform(-4, 4, 2))
        p, d2 = project_origin(a)
        ref = shapely.Polygon(a.vertices).distance(shapely.Point(0, 0))
        assert math.sqrt(d2) == pytest.approx(ref, abs=1e-12)


def test_ray_exit_and_line_interval():
    sq = box((-1, -2), (3, 1))
    assert ray_exit(sq, (0, 0), (1, 0)) == pytest.approx(3)
    assert line_interval(sq, (1, 0)) == pytest.approx((-1, 3))
    assert line_interval(box((1, 2), (2, 3)), (1, 0)) is None


def test_hausdorff_of_shifted_copy():
    a = hull_from_ring(UNIT)
    assert hausdorff(a, translate(a, (0.25, 0))) == pytest.approx(0.25)


def test_samples_lie_inside(rng):
    a = random_polygon(rng)
    pts = sample_region(a, 500, rng)
    assert np.all(a.margins(pts) >= -1e-12)
