"""Convex polygons in the plane, kept as a CCW vertex ring plus half-spaces.

Coordinates carry the units of the region's axes (MW or MVAr).  Incidence
decisions use an absolute tolerance of 1e-9 in those units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import AxisMismatch, DegenerateRegion

EPS = 1e-9
COLLINEAR_REL = 1e-12
PROVENANCES = ("exact", "linearized", "corrected", "interpolated")


@dataclass(frozen=True)
class HalfSpace:
    """The set ``normal . z <= offset`` with a unit-length normal."""

    normal: tuple
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = math.hypot(n[0], n[1])
        if not norm > 0:
            raise ValueError("half-space normal must be non-zero")
        object.__setattr__(self, "normal", (float(n[0] / norm), float(n[1] / norm)))
        object.__setattr__(self, "offset", float(self.offset) / norm)

    def slack(self, p) -> float:
        """``offset - normal . p``; negative outside."""
        return self.offset - (self.normal[0] * p[0] + self.normal[1] * p[1])


class Containment(NamedTuple):
    inside: bool
    margin: float


class _Empty:
    """Result of an intersection with no interior."""

    is_empty = True
    area = 0.0

    def __bool__(self):
        return False

    def __repr__(self):
        return "EMPTY"


EMPTY = _Empty()


@dataclass(frozen=True, eq=False)
class Region:
    vertices: np.ndarray
    halfspaces: tuple
    axes: tuple = ()
    provenance: str = "exact"
    is_empty = False

    def __bool__(self):
        return True

    @property
    def area(self) -> float:
        return polygon_area(self.vertices)

    @property
    def centroid(self) -> np.ndarray:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cross = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
        a = cross.sum() / 2
        return np.array([((v[:, 0] + w[:, 0]) * cross).sum(), ((v[:, 1] + w[:, 1]) * cross).sum()]) / (6 * a)

    @property
    def normals(self) -> np.ndarray:
        return np.array([h.normal for h in self.halfspaces])

    @property
    def offsets(self) -> np.ndarray:
        return np.array([h.offset for h in self.halfspaces])

    def margins(self, points) -> np.ndarray:
        """Vectorised containment margin for an (N, 2) array."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.min(self.offsets[None, :] - pts @ self.normals.T, axis=1)

    def with_provenance(self, provenance: str) -> "Region":
        return Region(self.vertices, self.halfspaces, self.axes, provenance)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def polygon_area(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return 0.0
    w = np.roll(v, -1, axis=0)
    return float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]) / 2)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _turns_left(o, a, b) -> bool:
    c = _cross(o, a, b)
    scale = math.hypot(a[0] - o[0], a[1] - o[1]) * math.hypot(b[0] - o[0], b[1] - o[1])
    return c > COLLINEAR_REL * scale


def convex_hull(points) -> np.ndarray:
    """Monotone-chain hull, CCW, collinear and duplicate points dropped."""
    pts = sorted({(float(p[0]), float(p[1])) for p in np.asarray(points, dtype=float)})
    if len(pts) < 3:
        return np.array(pts, dtype=float).reshape(-1, 2)
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and not _turns_left(lower[-2], lower[-1], p):
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and not _turns_left(upper[-2], upper[-1], p):
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], dtype=float)


def halfspaces_from_ring(vertices: np.ndarray) -> tuple:
    hs = []
    k = len(vertices)
    for i in range(k):
        a, b = vertices[i], vertices[(i + 1) % k]
        d = b - a
        n = (d[1], -d[0])
        hs.append(HalfSpace(n, n[0] * a[0] + n[1] * a[1]))
    return tuple(hs)


def hull_from_ring(points, axes: Sequence = (), provenance: str = "exact") -> Region:
    """Build a region from boundary points.

    The points need not be convex or ordered; interior and collinear points
    are pruned.  The ring starts at its lowest-then-leftmost vertex.

    Raises:
        DegenerateRegion: fewer than three non-collinear points.
    """
    ring = convex_hull(points)
    if len(ring) < 3 or polygon_area(ring) <= 0:
        raise DegenerateRegion(f"need at least 3 non-collinear points, got {len(ring)} hull vertices")
    start = min(range(len(ring)), key=lambda i: (ring[i, 1], ring[i, 0]))
    ring = np.roll(ring, -start, axis=0)
    return Region(ring, halfspaces_from_ring(ring), tuple(axes), provenance)


def box(lo, hi, axes: Sequence = (), provenance: str = "exact") -> Region:
    (x0, y0), (x1, y1) = lo, hi
    return hull_from_ring([(x0, y0), (x1, y0), (x1, y1), (x0, y1)], axes, provenance)


def clip(vertices: np.ndarray, normal, offset: float) -> np.ndarray:
    """Keep the part of a convex polygon with ``normal . z <= offset``."""
    out = []
    k = len(vertices)
    if k == 0:
        return np.zeros((0, 2))
    d = offset - vertices @ np.asarray(normal, dtype=float)
    for i in range(k):
        j = (i + 1) % k
        p, q, dp, dq = vertices[i], vertices[j], d[i], d[j]
        if dp >= 0:
            out.append(p)
        if (dp >= 0) != (dq >= 0):
            t = dp / (dp - dq)
            out.append(p + t * (q - p))
    return np.array(out, dtype=float).reshape(-1, 2)


def _check_axes(a: Region, b: Region) -> None:
    if a.axes and b.axes and tuple(a.axes) != tuple(b.axes):
        raise AxisMismatch(f"axes differ: {a.axes} vs {b.axes}")


def intersect(a: Region, b: Region):
    """Convex clipping of ``a`` by every half-space of ``b``.

    Returns ``EMPTY`` when the overlap has no interior.
    """
    _check_axes(a, b)
    poly = a.vertices
    for h in b.halfspaces:
        poly = clip(poly, h.normal, h.offset)
        if len(poly) < 3:
            return EMPTY
    try:
        out = hull_from_ring(poly, a.axes or b.axes, a.provenance)
    except DegenerateRegion:
        return EMPTY
    scale = max(1.0, float(np.max(np.abs(out.vertices))))
    if out.area <= (EPS * scale) ** 2:
        return EMPTY
    return out


def translate(r: Region, delta) -> Region:
    d = np.asarray(delta, dtype=float)
    hs = tuple(HalfSpace(h.normal, h.offset + h.normal[0] * d[0] + h.normal[1] * d[1]) for h in r.halfspaces)
    return Region(r.vertices + d, hs, r.axes, r.provenance)


def contains(r: Region, p, tol: float = EPS) -> Containment:
    m = min(h.slack(p) for h in r.halfspaces)
    return Containment(m >= -tol, float(m))


def nearest_on_segment(a, b, p) -> np.ndarray:
    d = b - a
    dd = float(d @ d)
    t = 0.0 if dd == 0 else min(1.0, max(0.0, float((p - a) @ d) / dd))
    return a + t * d


def project_point(r: Region, p, tol: float = EPS) -> tuple[np.ndarray, float]:
    """Nearest point of ``r`` to ``p`` and the squared distance."""
    p = np.asarray(p, dtype=float)
    if len(r.vertices) < 3:
        raise DegenerateRegion("cannot project onto a degenerate region")
    if contains(r, p, tol).inside:
        return p.copy(), 0.0
    best, best_d2 = None, math.inf
    v = r.vertices
    for i in range(len(v)):
        q = nearest_on_segment(v[i], v[(i + 1) % len(v)], p)
        d2 = float((q - p) @ (q - p))
        if d2 < best_d2:
            best, best_d2 = q, d2
    return best, best_d2


def project_origin(r: Region, tol: float = EPS) -> tuple[np.ndarray, float]:
    return project_point(r, np.zeros(2), tol)


def distance(r: Region, p) -> float:
    return math.sqrt(project_point(r, p)[1])


def hausdorff(a: Region, b: Region) -> float:
    """Hausdorff distance between two convex polygons (vertex maxima suffice)."""
    da = max(distance(b, v) for v in a.vertices)
    db = max(distance(a, v) for v in b.vertices)
    return max(da, db)


def ray_exit(r: Region, start, direction) -> float:
    """Largest ``t`` with ``start + t * direction`` still in ``r`` (start inside)."""
    s = np.asarray(start, dtype=float)
    d = np.asarray(direction, dtype=float)
    nd = r.normals @ d
    slack = r.offsets - r.normals @ s
    with np.errstate(divide="ignore"):
        t = np.where(nd > 0, slack / np.where(nd > 0, nd, 1.0), math.inf)
    return float(np.min(t))


def line_interval(r: Region, direction) -> tuple[float, float] | None:
    """Parameter interval of ``{t * direction}`` inside ``r``, or None."""
    d = np.asarray(direction, dtype=float)
    lo, hi = -math.inf, math.inf
    for h in r.halfspaces:
        a = h.normal[0] * d[0] + h.normal[1] * d[1]
        if abs(a) <= 1e-15:
            if h.offset < -EPS:
                return None
            continue
        t = h.offset / a
        if a > 0:
            hi = min(hi, t)
        else:
            lo = max(lo, t)
    if lo > hi + EPS:
        return None
    return lo, max(lo, hi)


def sample_region(r: Region, n: int, rng: np.random.Generator, boundary_fraction: float = 0.5) -> np.ndarray:
    """Random points: ``boundary_fraction`` on the edges, the rest uniform inside."""
    nb = int(round(n * boundary_fraction))
    v = r.vertices
    edges = np.roll(v, -1, axis=0) - v
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    k = rng.choice(len(v), size=nb, p=lengths / lengths.sum())
    t = rng.random(nb)[:, None]
    bnd = v[k] + t * edges[k]
    # fan triangulation from vertex 0, area weighted
    tri_a = np.array([polygon_area([v[0], v[i], v[i + 1]]) for i in range(1, len(v) - 1)])
    idx = rng.choice(len(tri_a), size=n - nb, p=tri_a / tri_a.sum()) + 1
    u, w = rng.random(n - nb), rng.random(n - nb)
    flip = u + w > 1
    u[flip], w[flip] = 1 - u[flip], 1 - w[flip]
    inner = v[0] + u[:, None] * (v[idx] - v[0]) + w[:, None] * (v[idx + 1] - v[0])
    return np.concatenate([bnd, inner])


def winding_contains(vertices: np.ndarray, p) -> bool:
    """Point-in-polygon by winding number, independent of the half-spaces."""
    wn = 0
    x, y = p
    k = len(vertices)
    for i in range(k):
        (x0, y0), (x1, y1) = vertices[i], vertices[(i + 1) % k]
        if y0 <= y:
            if y1 > y and _cross((x0, y0), (x1, y1), (x, y)) > 0:
                wn += 1
        elif y1 <= y and _cross((x0, y0), (x1, y1), (x, y)) < 0:
            wn -= 1
    return wn != 0
