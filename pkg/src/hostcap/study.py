"""Anchor selection and the timing comparison of interpolation scenarios."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from .explorer import ExploreConfig, ExploreResult, explore_region_2d, make_evaluator, ray_boundary
from .geometry import convex_hull, polygon_area
from .grid import GridCase
from .interp import InterpolationReport, interpolate_boundary


def max_area_corners(points: list, k: int = 4) -> list:
    """The ``k`` boundary points spanning the largest polygon, kept in
    boundary order.  Brute force over the points on the convex hull."""

    locs = np.array([p.location for p in points])
    hull = convex_hull(locs)
    on_hull = [i for i, p in enumerate(locs) if any(np.array_equal(p, h) for h in hull)]
    if len(on_hull) <= k:
        return [points[i] for i in on_hull]
    best, best_area = None, -1.0
    for combo in itertools.combinations(on_hull, k):
        a = polygon_area(locs[list(combo)])
        if a > best_area + 1e-12:
            best, best_area = combo, a
    return [points[i] for i in best]


def edge_anchors(evaluator, corners: list, per_edge: int, eps: float) -> list:
    """Boundary points found by dichotomy on rays through evenly spaced
    points of each corner-to-corner edge, returned in ring order with the
    corners included."""
    out = []
    k = len(corners)
    for c in range(k):
        a, b = corners[c].location, corners[(c + 1) % k].location
        out.append(corners[c])
        for j in range(1, per_edge + 1):
            target = a + (b - a) * j / (per_edge + 1)
            d = target / np.linalg.norm(target)
            start = target if evaluator(target) else np.zeros(2)
            reach = 2 * float(np.linalg.norm(target))
            out.append(ray_boundary(evaluator, start, d, reach, eps, origin=np.zeros(2)))
    return out


@dataclass
class ScenarioResult:
    anchors: int
    total: int
    seconds: float
    report: InterpolationReport | None

    @property
    def per_point(self) -> float:
        return self.seconds / self.total

    @property
    def max_q_correction(self) -> float:
        return self.report.max_q_correction if self.report is not None else 0.0


def interpolation_study(
    grid: GridCase,
    axes=("bus7:P", "bus8:P"),
    *,
    total: int = 400,
    anchor_counts=(4, 40),
    eps: float = 1e-4,
    explored: ExploreResult | None = None,
) -> dict:
    """Compare boundary production by power flow only against mixtures of
    power-flow anchors and interpolated points.

    Corners are the four explored boundary points of largest enclosed area.
    Every scenario's clock covers its own power-flow anchors plus
    interpolation; the initial exploration is shared and not timed.
    Keys of the result: ``"powerflow"`` and each anchor count.
    """
    ev = make_evaluator(grid, axes, "exact")
    if explored is None:
        explored = explore_region_2d(ev, ev.axes, ExploreConfig(dichotomy_eps=eps, max_directions=64))
    corners = max_area_corners(explored.points, 4)
    out = {}

    t0 = time.perf_counter()
    pts = edge_anchors(ev, corners, (total - 4) // 4, eps)
    out["powerflow"] = ScenarioResult(len(pts), len(pts), time.perf_counter() - t0, None)

    for k in anchor_counts:
        if (k - 4) % 4:
            raise ValueError("anchor counts must be 4 plus a multiple of 4")
        t0 = time.perf_counter()
        anchors = edge_anchors(ev, corners, (k - 4) // 4, eps)
        rep = interpolate_boundary(anchors, total, ev.axes)
        out[k] = ScenarioResult(k, total, time.perf_counter() - t0, rep)
    return out
