"""Energy-storage regulation sized against a hosting capacity region.

Coordinates are shifted so the current operating point sits at the origin;
a regulation vector ``(x, y)`` is the storage output added on the two
region axes.  An operating point inside the region needs no regulation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import AxisMismatch, DegenerateRegion, FormulationMismatch, LineMissesRegion
from .geometry import EPS, Region, clip, contains, line_interval, project_origin, translate

MODES = ("min-apparent", "fixed-pf", "two-site-cost")
AGREE_TOL = 1e-9


@dataclass
class SizingProblem:
    region: Region
    operating_point: tuple
    mode: str = "min-apparent"
    alpha: float = 0.0  # fixed-pf angle, radians
    beta: float = 1.0  # cost per MW on axis 1
    gamma: float = 1.0  # cost per MW on axis 2

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "fixed-pf" and not abs(self.alpha) < math.pi / 2:
            raise ValueError("power-factor angle must satisfy |alpha| < pi/2")
        if self.mode == "two-site-cost" and not (self.beta > 0 and self.gamma > 0):
            raise ValueError("beta and gamma must be positive")
        self.operating_point = tuple(float(v) for v in self.operating_point)
        if len(self.operating_point) != 2:
            raise AxisMismatch("operating point needs exactly two coordinates")


@dataclass
class RegulationResult:
    regulation: np.ndarray
    objective: float
    feasible_without_ess: bool
    active_edge: str
    mode: str = "min-apparent"

    @property
    def capacity(self) -> float:
        """Regulation power (MVA) for the sizing modes, the cost itself otherwise."""
        return self.objective if self.mode == "two-site-cost" else math.sqrt(self.objective)


def _zero(mode: str) -> RegulationResult:
    return RegulationResult(np.zeros(2), 0.0, True, "inside", mode)


def shift_coordinates(region: Region, operating_point) -> Region:
    p = np.asarray(operating_point, dtype=float)
    if p.shape != (2,):
        raise AxisMismatch("operating point needs exactly two coordinates")
    return translate(region, -p)


def _describe(region: Region, point) -> str:
    """Name the boundary element of ``region`` that holds ``point``."""
    v = region.vertices
    for k, q in enumerate(v):
        if np.linalg.norm(q - point) <= 1e-9 * max(1.0, float(np.abs(q).max())):
            return f"vertex {k}"
    slack = np.abs(region.offsets - region.normals @ point)
    k = int(np.argmin(slack))
    return f"edge {k}-{(k + 1) % len(v)}"


def min_apparent_power(problem: SizingProblem) -> RegulationResult:
    """Smallest ``x^2 + y^2`` moving the operating point into the region.

    Raises:
        DegenerateRegion: region has fewer than three vertices.
    """
    shifted = shift_coordinates(problem.region, problem.operating_point)
    if contains(shifted, (0.0, 0.0)).inside:
        return _zero("min-apparent")
    point, d2 = project_origin(shifted)
    return RegulationResult(point, float(d2), False, _describe(shifted, point), "min-apparent")


def min_capacity_fixed_pf(problem: SizingProblem) -> RegulationResult:
    """Like :func:`min_apparent_power` with ``y = tan(alpha) * x``.

    Raises:
        LineMissesRegion: no regulation along this power factor works.
    """
    shifted = shift_coordinates(problem.region, problem.operating_point)
    if len(shifted.vertices) < 3:
        raise DegenerateRegion("region has fewer than three vertices")
    if contains(shifted, (0.0, 0.0)).inside:
        return _zero("fixed-pf")
    k = math.tan(problem.alpha)
    span = line_interval(shifted, (1.0, k))
    if span is None:
        raise LineMissesRegion(f"no regulation at angle {problem.alpha:g} rad reaches the region")
    x = min(max(0.0, span[0]), span[1])
    point = np.array([x, k * x])
    return RegulationResult(point, float(x * x * (1 + k * k)), False, _describe(shifted, point), "fixed-pf")


# ---------------------------------------------------------------- two-site cost


def _pick(cands, beta: float, gamma: float):
    """Cheapest candidate; ties go to the lexicographically smallest (|x|, |y|)."""
    costs = [beta * abs(c[0]) + gamma * abs(c[1]) for c in cands]
    best = min(costs)
    tie = AGREE_TOL * max(1.0, abs(best))
    pool = [c for c, v in zip(cands, costs) if v <= best + tie]
    return min(pool, key=lambda c: (abs(c[0]), abs(c[1]))), best


def cost_by_orthants(shifted: Region, beta: float, gamma: float):
    """Clip the region to each sign orthant; the linear objective there is
    minimised at a vertex of the clipped polygon."""
    cands = []
    for sx in (1.0, -1.0):
        for sy in (1.0, -1.0):
            poly = clip(shifted.vertices, (-sx, 0.0), 0.0)
            poly = clip(poly, (0.0, -sy), 0.0)
            cands.extend(np.asarray(p) for p in poly)
    if not cands:
        raise DegenerateRegion("region vanished in every orthant")
    return _pick(cands, beta, gamma)


def cost_by_kinks(shifted: Region, beta: float, gamma: float):
    """Epigraph route: with ``x = m1 - m2`` and ``y = n1 - n2`` the optimum
    sits where the region boundary meets a kink of ``beta|x| + gamma|y|``.
    Candidates are the polygon vertices, edge crossings of both axes, and
    the origin when it is inside."""
    v = shifted.vertices
    cands = [np.asarray(p) for p in v]
    for i in range(len(v)):
        a, b = v[i], v[(i + 1) % len(v)]
        for ax in (0, 1):
            if (a[ax] < 0 < b[ax]) or (b[ax] < 0 < a[ax]):
                t = a[ax] / (a[ax] - b[ax])
                p = a + t * (b - a)
                p[ax] = 0.0
                cands.append(p)
    if contains(shifted, (0.0, 0.0)).inside:
        cands.append(np.zeros(2))
    return _pick(cands, beta, gamma)


def optimal_two_storage_cost(problem: SizingProblem) -> RegulationResult:
    """Cheapest pair of storage outputs under ``beta|x| + gamma|y|``.

    Both routes are always solved and must agree to 1e-9 (relative to the
    objective when it exceeds one).

    Raises:
        DegenerateRegion: region has fewer than three vertices.
        FormulationMismatch: the routes disagree.
    """
    shifted = shift_coordinates(problem.region, problem.operating_point)
    if len(shifted.vertices) < 3:
        raise DegenerateRegion("region has fewer than three vertices")
    if contains(shifted, (0.0, 0.0)).inside:
        return _zero("two-site-cost")
    pa, ca = cost_by_orthants(shifted, problem.beta, problem.gamma)
    pb, cb = cost_by_kinks(shifted, problem.beta, problem.gamma)
    if abs(ca - cb) > AGREE_TOL * max(1.0, abs(ca)):
        raise FormulationMismatch(f"orthant cost {ca!r} vs kink cost {cb!r}")
    return RegulationResult(np.asarray(pa, dtype=float), float(ca), False, _describe(shifted, pa), "two-site-cost")


SOLVERS = {
    "min-apparent": min_apparent_power,
    "fixed-pf": min_capacity_fixed_pf,
    "two-site-cost": optimal_two_storage_cost,
}


def solve(problem: SizingProblem) -> RegulationResult:
    return SOLVERS[problem.mode](problem)


# ---------------------------------------------------------------- heatmap


def sweep_heatmap(region: Region, xs, ys, mode: str = "min-apparent", *, workers: int = 1, **params) -> np.ndarray:
    """Sizing answer on the lattice ``xs`` x ``ys``.

    Entry ``[i, j]`` belongs to ``(xs[j], ys[i])`` and holds
    :attr:`RegulationResult.capacity`: MVA for the two sizing modes, cost
    for ``two-site-cost``.  Fixed power factors that miss the region give NaN.
    Rows may be computed on ``workers`` threads; the matrix is identical.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)

    def row(y):
        out = np.empty(len(xs))
        for j, x in enumerate(xs):
            try:
                out[j] = solve(SizingProblem(region, (x, y), mode, **params)).capacity
            except LineMissesRegion:
                out[j] = math.nan
        return out

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(row, ys))
    else:
        rows = [row(y) for y in ys]
    return np.array(rows).reshape(len(ys), len(xs))


def membership_mask(region: Region, xs, ys, tol: float = EPS) -> np.ndarray:
    """``contains`` on the same lattice as :func:`sweep_heatmap`."""
    return np.array([[contains(region, (x, y), tol).inside for x in xs] for y in ys])
