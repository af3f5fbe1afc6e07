"""Boundary search and two-dimensional region exploration.

An *evaluator* is any callable mapping a 2-vector (axis coordinates, MW or
MVAr) to a truthy/falsy verdict.  Grid evaluators return a
:class:`~hostcap.grid.FeasibilityReport`, whose ``solution`` is kept on the
boundary points for later interpolation; synthetic predicates may return
plain booleans.
"""

from __future__ import annotations

import logging
import math
import threading
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRegion, EmptyCorrection, InfeasibleStart, UnboundedRay
from .geometry import Region, contains, hull_from_ring, intersect, ray_exit, translate
from .grid import GridCase, OperatingPoint, evaluate_point, parse_axes
from .linearized import evaluate_point_linearized

log = logging.getLogger(__name__)


@dataclass
class ExploreConfig:
    dichotomy_eps: float = 1e-4
    max_directions: int = 64
    initial_basis: tuple = ((1.0, 0.0), (0.0, 1.0))
    ray_length: float | None = None  # None: derive from the evaluator
    max_doublings: int = 10
    workers: int = 1

    def __post_init__(self):
        if not self.dichotomy_eps > 0:
            raise ValueError("dichotomy_eps must be positive")
        if self.max_directions < 4 or self.max_directions % 2:
            raise ValueError("max_directions must be an even number >= 4")
        b = np.asarray(self.initial_basis, dtype=float)
        if b.shape != (2, 2) or abs(b[0] @ b[1]) > 1e-12 or not np.allclose(np.hypot(b[:, 0], b[:, 1]), 1.0):
            raise ValueError("initial_basis must be two orthonormal 2-vectors")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class BoundaryPoint:
    location: np.ndarray
    solution: object
    direction: np.ndarray

    @property
    def angle(self) -> float:
        return math.atan2(self.direction[1], self.direction[0]) % (2 * math.pi)


@dataclass
class ExploreResult:
    region: Region
    points: list  # BoundaryPoint, sorted by direction angle
    calls: int = 0
    elapsed: float = 0.0
    warnings: list = field(default_factory=list)


class _Counter:
    """Wraps an evaluator and counts its calls."""

    def __init__(self, fn):
        self.fn = fn
        self.calls = 0
        self._lock = threading.Lock()

    def __call__(self, p):
        with self._lock:
            self.calls += 1
        return self.fn(p)


def _solution(verdict):
    return getattr(verdict, "solution", None)


# ---------------------------------------------------------------- boundary search


def dichotomy_boundary(evaluator, s_l, s_u, eps: float, *, debug: bool = False) -> BoundaryPoint:
    """Bisect the segment from feasible ``s_l`` to infeasible ``s_u``.

    ``s_u`` is trusted to be infeasible and is not evaluated, so the call
    count is one (for ``s_l``) plus ``ceil(log2(|s_u - s_l| / eps))``.
    With ``debug`` the bracket invariant is re-checked every step.

    Raises:
        InfeasibleStart: ``s_l`` is infeasible.
    """
    a = np.asarray(s_l, dtype=float)
    b = np.asarray(s_u, dtype=float)
    span = float(np.linalg.norm(b - a))
    direction = (b - a) / span if span > 0 else np.zeros(2)
    first = evaluator(a)
    if not first:
        raise InfeasibleStart(f"start point {a.tolist()} is infeasible")
    sol = _solution(first)
    while np.linalg.norm(b - a) > eps:
        mid = (a + b) / 2
        verdict = evaluator(mid)
        if verdict:
            a, sol = mid, _solution(verdict)
        else:
            b = mid
        if debug:
            assert evaluator(a) and not evaluator(b), "dichotomy bracket lost"
    return BoundaryPoint(a, sol, direction)


def ray_boundary(
    evaluator, start, direction, length: float, eps: float, *, max_doublings: int = 10, origin=None
) -> BoundaryPoint:
    """Boundary along ``start + t * direction``, doubling the ray until its
    far end is infeasible.

    Raises:
        UnboundedRay: still feasible after ``max_doublings`` doublings.
        InfeasibleStart: ``start`` is infeasible.
    """
    start = np.asarray(start, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    base = start if origin is None else np.asarray(origin, dtype=float)
    lo = start
    reach = max(length, 2 * float(np.linalg.norm(start - base)))
    for _ in range(max_doublings + 1):
        up = base + reach * d
        if not evaluator(up):
            bp = dichotomy_boundary(evaluator, lo, up, eps)
            bp.direction = d
            return bp
        lo = up
        reach *= 2
    raise UnboundedRay(f"ray along {d.tolist()} still feasible at length {reach / 2:g}")


# ---------------------------------------------------------------- exploration


def _gap_direction(points: list) -> np.ndarray:
    """Direction through the chord midpoint of the widest angular gap."""
    angles = [p.angle for p in points]
    best, best_gap = 0, -1.0
    for k in range(len(points)):
        gap = (angles[(k + 1) % len(points)] - angles[k]) % (2 * math.pi)
        if gap > best_gap + 1e-12:
            best, best_gap = k, gap
    a, b = points[best], points[(best + 1) % len(points)]
    mid = (a.location + b.location) / 2
    n = float(np.linalg.norm(mid))
    if n < 1e-12 or best_gap >= math.pi - 1e-12:
        # chord passes through the origin: bisect the angle instead
        th = a.angle + best_gap / 2
        return np.array([math.cos(th), math.sin(th)])
    return mid / n


def explore_region_2d(evaluator, axes=(), config: ExploreConfig | None = None, *, provenance: str = "exact") -> ExploreResult:
    """Explore the feasible region of ``evaluator`` around the origin.

    Seeds the four rays ``+-v1, +-v2``, then repeatedly probes the chord
    midpoint direction of the widest angular gap together with its antipode.
    New rays start from where they leave the current hull, or from the
    origin if that point is not feasible.  Each round's two rays are
    independent and may run on ``config.workers`` threads; the result does
    not depend on the worker count.

    Raises:
        InfeasibleStart: the origin is infeasible.
        UnboundedRay, DegenerateRegion: see :func:`ray_boundary` and
            :func:`~hostcap.geometry.hull_from_ring`.
    """
    cfg = config or ExploreConfig()
    t0 = time.perf_counter()
    ev = _Counter(evaluator)
    origin = np.zeros(2)
    if not ev(origin):
        raise InfeasibleStart("the origin (no extra integration) is infeasible")
    length = cfg.ray_length or getattr(evaluator, "ray_length", None) or 1.0
    notes: list = []

    def probe(d, hull):
        start = origin
        if hull is not None and contains(hull, origin).inside:
            t = ray_exit(hull, origin, d)
            if math.isfinite(t) and t > 0:
                cand = t * d
                if ev(cand):
                    start = cand
        return ray_boundary(ev, start, d, length, cfg.dichotomy_eps, max_doublings=cfg.max_doublings, origin=origin)

    def run(dirs, hull):
        if cfg.workers > 1 and len(dirs) > 1:
            with ThreadPoolExecutor(min(cfg.workers, len(dirs))) as pool:
                return list(pool.map(lambda d: probe(d, hull), dirs))
        return [probe(d, hull) for d in dirs]

    v1, v2 = (np.asarray(v, dtype=float) for v in cfg.initial_basis)
    points = run([v1, v2, -v1, -v2], None)
    points.sort(key=lambda p: p.angle)
    seen = {round(p.angle, 12) for p in points}

    while len(points) < cfg.max_directions:
        try:
            hull = hull_from_ring([p.location for p in points], axes)
        except DegenerateRegion:
            hull = None
        d = _gap_direction(points)
        dirs = [dd for dd in (d, -d) if round(math.atan2(dd[1], dd[0]) % (2 * math.pi), 12) not in seen]
        if not dirs:
            break
        new = run(dirs, hull)
        for bp in new:
            if hull is not None and contains(hull, bp.location, -cfg.dichotomy_eps).inside:
                notes.append(f"boundary point {bp.location.tolist()} lies inside the current hull")
            seen.add(round(bp.angle, 12))
        points = sorted(points + new, key=lambda p: p.angle)

    if notes:
        warnings.warn(
            f"{len(notes)} boundary points landed inside the explored hull; the evaluator looks non-convex",
            RuntimeWarning,
            stacklevel=2,
        )
    region = hull_from_ring([p.location for p in points], axes, provenance)
    elapsed = time.perf_counter() - t0
    log.info("explored %d directions with %d evaluator calls in %.3f s", len(points), ev.calls, elapsed)
    return ExploreResult(region, points, ev.calls, elapsed, notes)


# ---------------------------------------------------------------- grid evaluators


class GridEvaluator:
    """Feasibility of extra injections on two POC axes of a grid."""

    def __init__(self, grid: GridCase, axes, model: str = "exact", base: OperatingPoint | None = None):
        if model not in ("exact", "linearized"):
            raise ValueError(f"unknown model {model!r}")
        self.grid = grid
        self.axes = parse_axes(axes)
        self.model = model
        self.base = base or OperatingPoint()
        OperatingPoint.from_axes(self.axes, [0.0] * len(self.axes)).check(grid)
        self._eval = evaluate_point if model == "exact" else evaluate_point_linearized

    @property
    def ray_length(self) -> float:
        """Twice the widest finite bound span of the axes, else ``2 * s_base``."""
        spans = []
        for ax in self.axes:
            b = self.grid.bus(ax.bus)
            lo, hi = (b.p_min, b.p_max) if ax.component == "P" else (b.q_min, b.q_max)
            if math.isfinite(hi - lo):
                spans.append(hi - lo)
        return 2 * max(spans) if spans else 2 * self.grid.s_base

    def operating_point(self, point) -> OperatingPoint:
        entries = dict(self.base.entries)
        for ax, val in zip(self.axes, point):
            entries[(ax.bus, ax.component)] = entries.get((ax.bus, ax.component), 0.0) + float(val)
        return OperatingPoint(entries)

    def __call__(self, point):
        return self._eval(self.grid, self.operating_point(point))


def make_evaluator(grid: GridCase, axes, model: str = "exact", base: OperatingPoint | None = None) -> GridEvaluator:
    return GridEvaluator(grid, axes, model, base)


def explore_grid(grid: GridCase, axes, model: str = "linearized", config: ExploreConfig | None = None) -> ExploreResult:
    ev = make_evaluator(grid, axes, model)
    return explore_region_2d(ev, ev.axes, config, provenance="exact" if model == "exact" else "linearized")


# ---------------------------------------------------------------- correction


def correction_shifts(grid: GridCase, axes) -> list[np.ndarray]:
    """Per line, the shift of each axis: ``r * l_max`` on P axes and
    ``x * l_max`` on Q axes, converted to MW / MVAr."""
    axes = parse_axes(axes)
    topo = grid.topology
    out = []
    for e in range(topo.n_line):
        coef = [topo.r[e] if ax.component == "P" else topo.x[e] for ax in axes]
        out.append(np.array([c * topo.l_max[e] * grid.s_base for c in coef]))
    return out


def correct_region(region: Region, grid: GridCase) -> Region:
    """Shrink a linearized region until losses cannot push it outside the
    exact one.

    For every line and every axis the region is intersected with a copy of
    itself translated along that axis by the line's loss bound.

    Raises:
        EmptyCorrection: the intersection vanished, or a line has no
            current limit (the shift would be unbounded).
    """
    if not region.axes:
        raise ValueError("region carries no axis labels")
    out = region
    for e, shift in enumerate(correction_shifts(grid, region.axes)):
        if not np.all(np.isfinite(shift)):
            raise EmptyCorrection(f"line {grid.line_ids[e]} has no current limit; correction is unbounded")
        for c in range(len(shift)):
            delta = np.zeros(2)
            delta[c] = shift[c]
            if delta[c] == 0:
                continue
            out = intersect(out, translate(region, delta))
            if not out:
                raise EmptyCorrection(f"correction emptied the region at line {grid.line_ids[e]}")
    return out.with_provenance("corrected")
