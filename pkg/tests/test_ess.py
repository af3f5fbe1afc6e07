import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hostcap.errors import AxisMismatch, LineMissesRegion
from hostcap.ess import (
    SizingProblem,
    cost_by_kinks,
    cost_by_orthants,
    membership_mask,
    min_apparent_power,
    min_capacity_fixed_pf,
    optimal_two_storage_cost,
    shift_coordinates,
    solve,
    sweep_heatmap,
)
from hostcap.geometry import box, contains, hull_from_ring, sample_region, translate

SQUARE = box((-1, -1), (1, 1))


def random_instance(rng):
    centre = rng.uniform(-3, 3, 2)
    region = hull_from_ring(rng.normal(size=(8, 2)) * rng.uniform(0.3, 2.0) + centre)
    point = rng.uniform(-6, 6, 2)
    return region, point


def lattice_l1(region, point, beta, gamma, n=801):
    """Brute-force weighted L1 distance over a lattice of the region's bbox."""
    lo, hi = region.bbox()
    xs, ys = np.linspace(lo[0], hi[0], n), np.linspace(lo[1], hi[1], n)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = region.margins(pts) >= -1e-12
    d = pts[inside] - point
    cell = max(xs[1] - xs[0], ys[1] - ys[0])
    return float(np.min(beta * np.abs(d[:, 0]) + gamma * np.abs(d[:, 1]))), cell


class TestProblem:
    def test_validation(self):
        with pytest.raises(ValueError):
            SizingProblem(SQUARE, (0, 0), "bogus")
        with pytest.raises(ValueError):
            SizingProblem(SQUARE, (0, 0), "fixed-pf", alpha=math.pi / 2)
        with pytest.raises(ValueError):
            SizingProblem(SQUARE, (0, 0), "two-site-cost", beta=0)
        with pytest.raises(AxisMismatch):
            SizingProblem(SQUARE, (0, 0, 0))


class TestShift:
    def test_centroid_interior(self, rng):
        r, _ = random_instance(rng)
        assert contains(shift_coordinates(r, r.centroid), (0, 0)).margin > 0

    def test_zero_identity_and_composition(self, rng):
        r, _ = random_instance(rng)
        assert np.array_equal(shift_coordinates(r, (0, 0)).vertices, r.vertices)
        a, b = np.array([0.3, -1.2]), np.array([2.0, 0.5])
        twice = shift_coordinates(shift_coordinates(r, a), b)
        assert np.allclose(twice.vertices, shift_coordinates(r, a + b).vertices, atol=1e-12)


class TestMinApparent:
    def test_inside_is_zero(self):
        res = min_apparent_power(SizingProblem(SQUARE, (0.2, 0.3)))
        assert res.objective == 0 and res.feasible_without_ess and res.capacity == 0

    def test_square_example(self):
        res = min_apparent_power(SizingProblem(SQUARE, (2, 0)))
        assert np.allclose(res.regulation, (-1, 0)) and res.capacity == pytest.approx(1)
        assert res.active_edge.startswith("edge")

    def test_vertex_case(self):
        res = min_apparent_power(SizingProblem(SQUARE, (2, 3)))
        assert np.allclose(res.regulation, (-1, -2)) and res.active_edge.startswith("vertex")

    @settings(max_examples=40)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_variational_inequality(self, seed):
        rng = np.random.default_rng(seed)
        region, point = random_instance(rng)
        res = min_apparent_power(SizingProblem(region, point))
        shifted = shift_coordinates(region, point)
        assert contains(shifted, res.regulation, 1e-9).inside
        ps = sample_region(shifted, 1000, rng)
        x = res.regulation
        assert np.all((ps - x) @ x >= -1e-9 * max(1.0, float(x @ x)))

    @settings(max_examples=40)
    @given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(-1.5, 1.5))
    def test_fixed_pf_dominates(self, seed, alpha):
        rng = np.random.default_rng(seed)
        region, point = random_instance(rng)
        free = min_apparent_power(SizingProblem(region, point))
        try:
            fixed = min_capacity_fixed_pf(SizingProblem(region, point, "fixed-pf", alpha=alpha))
        except LineMissesRegion:
            return
        assert fixed.objective >= free.objective - 1e-12


class TestFixedPf:
    def test_inside(self):
        assert min_capacity_fixed_pf(SizingProblem(SQUARE, (0, 0), "fixed-pf", alpha=0.7)).objective == 0

    def test_square(self):
        res = min_capacity_fixed_pf(SizingProblem(box((1, -1), (2, 1)), (0, 0), "fixed-pf"))
        assert res.objective == pytest.approx(1) and np.allclose(res.regulation, (1, 0))

    def test_misses(self):
        with pytest.raises(LineMissesRegion):
            min_capacity_fixed_pf(SizingProblem(box((1, 2), (2, 3)), (0, 0), "fixed-pf"))

    def test_angle_scales_objective(self):
        res = min_capacity_fixed_pf(SizingProblem(box((1, -5), (2, 5)), (0, 0), "fixed-pf", alpha=math.pi / 4))
        assert res.objective == pytest.approx(2.0) and np.allclose(res.regulation, (1, 1))


class TestCost:
    def test_inside(self):
        assert optimal_two_storage_cost(SizingProblem(SQUARE, (0.5, 0), "two-site-cost")).objective == 0

    def test_square_example(self):
        res = optimal_two_storage_cost(SizingProblem(SQUARE, (3, 0), "two-site-cost"))
        assert res.objective == pytest.approx(2) and np.allclose(res.regulation, (-2, 0))

    def test_weights_pick_cheaper_axis(self):
        diamond = hull_from_ring([(1, 0), (0, 1), (-1, 0), (0, -1)])
        # from (1, 1) moving along y is ten times cheaper
        res = optimal_two_storage_cost(SizingProblem(diamond, (1, 1), "two-site-cost", beta=10, gamma=1))
        assert res.regulation[0] == pytest.approx(0, abs=1e-12) and res.objective == pytest.approx(1)

    def test_tie_break_smallest_abs(self):
        diamond = hull_from_ring([(1, 0), (0, 1), (-1, 0), (0, -1)])
        # beta = gamma: every point of the edge x + y = 1 costs 1 from (1, 1)
        res = optimal_two_storage_cost(SizingProblem(diamond, (1, 1), "two-site-cost"))
        assert res.objective == pytest.approx(1)
        assert np.allclose(res.regulation, (-1, 0)) or np.allclose(res.regulation, (0, -1))
        assert abs(res.regulation[0]) <= abs(res.regulation[1])

    @settings(max_examples=60)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_routes_agree(self, seed):
        rng = np.random.default_rng(seed)
        region, point = random_instance(rng)
        beta, gamma = rng.uniform(0.1, 10, 2)
        shifted = shift_coordinates(region, point)
        _, ca = cost_by_orthants(shifted, beta, gamma)
        _, cb = cost_by_kinks(shifted, beta, gamma)
        assert abs(ca - cb) <= 1e-9 * max(1.0, abs(ca))

    def test_lattice_oracle(self, rng):
        for _ in range(10):
            region, point = random_instance(rng)
            beta, gamma = rng.uniform(0.5, 3, 2)
            res = optimal_two_storage_cost(SizingProblem(region, point, "two-site-cost", beta=beta, gamma=gamma))
            ref, cell = lattice_l1(region, point, beta, gamma)
            assert res.objective <= ref + 1e-12
            assert ref - res.objective <= (beta + gamma) * cell


class TestHeatmap:
    def test_all_inside_zero(self):
        xs = ys = np.linspace(-0.5, 0.5, 5)
        for mode in ("min-apparent", "fixed-pf", "two-site-cost"):
            assert np.all(sweep_heatmap(SQUARE, xs, ys, mode) == 0)

    def test_zero_set_is_membership(self, rng):
        region, _ = random_instance(rng)
        lo, hi = region.bbox()
        xs = np.linspace(lo[0] - 1, hi[0] + 1, 25)
        ys = np.linspace(lo[1] - 1, hi[1] + 1, 21)
        m = sweep_heatmap(region, xs, ys, "two-site-cost", beta=300.0, gamma=650.0)
        assert m.shape == (21, 25)
        assert np.array_equal(m == 0, membership_mask(region, xs, ys))

    def test_lipschitz(self, rng):
        region, _ = random_instance(rng)
        beta, gamma = 2.0, 5.0
        xs = np.linspace(-6, 6, 31)
        ys = np.linspace(-6, 6, 31)
        m = sweep_heatmap(region, xs, ys, "two-site-cost", beta=beta, gamma=gamma)
        diag = math.hypot(xs[1] - xs[0], ys[1] - ys[0])
        bound = max(beta, gamma) * diag + 1e-9
        assert np.abs(np.diff(m, axis=0)).max() <= bound
        assert np.abs(np.diff(m, axis=1)).max() <= bound

    def test_fixed_pf_nan_where_missed(self):
        m = sweep_heatmap(box((1, 2), (2, 3)), [0.0], [0.0], "fixed-pf")
        assert math.isnan(m[0, 0])

    def test_workers_identical(self):
        xs = np.linspace(-3, 3, 9)
        a = sweep_heatmap(SQUARE, xs, xs, "min-apparent")
        b = sweep_heatmap(SQUARE, xs, xs, "min-apparent", workers=3)
        assert np.array_equal(a, b)

    def test_solve_dispatch(self):
        p = SizingProblem(translate(SQUARE, (3, 0)), (0, 0))
        assert solve(p).capacity == pytest.approx(2)
