"""Boundary densification through the relaxed branch-flow model.

Affine combinations of two exact DistFlow states satisfy every linear
equation and over-estimate the squared current (the current definition is
convex), so they are feasible for the relaxed model.  Each line is then
pulled back onto the tight surface ``l = (P^2 + Q^2) / v_i`` by a scalar
``eps``: the line current drops by ``eps``, its sending-end flows drop by
``r * eps / 2`` and ``x * eps / 2``, and both end buses absorb the same
halves.  Voltages and the linear equations are untouched by this map.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, NoConvergence
from .grid import (
    FEAS_TOL,
    GridCase,
    OperatingPoint,
    Solution,
    check_feasibility,
    evaluate_point,
    parse_axes,
)

log = logging.getLogger(__name__)

EPS_TOL = 1e-10
EPS_MAX_ITER = 200


@dataclass
class RelaxedPoint:
    grid: GridCase
    v: np.ndarray
    l: np.ndarray
    p_flow: np.ndarray
    q_flow: np.ndarray
    p_inj: np.ndarray
    q_inj: np.ndarray

    @property
    def violation(self) -> np.ndarray:
        """``l - (P^2 + Q^2) / v_i`` per line; non-negative for relaxed states."""
        vf = self.v[self.grid.topology.from_pos]
        return self.l - (self.p_flow**2 + self.q_flow**2) / vf


def _same_grid(a: GridCase, b: GridCase) -> bool:
    if a is b:
        return True
    ta, tb = a.topology, b.topology
    return (
        ta.ids == tb.ids
        and np.array_equal(ta.parent, tb.parent)
        and np.array_equal(ta.r, tb.r)
        and np.array_equal(ta.x, tb.x)
        and a.v_slack == b.v_slack
    )


def combine_solutions(a: Solution, b: Solution, t: float) -> RelaxedPoint:
    """``(1 - t) * a + t * b`` componentwise.

    Raises:
        GridMismatch: the two states belong to different grids.
    """
    if not _same_grid(a.grid, b.grid):
        raise GridMismatch("solutions come from different grids")
    s = 1.0 - t
    return RelaxedPoint(
        a.grid,
        *(s * getattr(a, k) + t * getattr(b, k) for k in ("v", "l", "p_flow", "q_flow", "p_inj", "q_inj")),
    )


# ---------------------------------------------------------------- epsilon


def epsilon_iterate(v_i, p, q, l, r, x, *, tol: float = EPS_TOL, max_iter: int = EPS_MAX_ITER):
    """Fixed-point search for ``eps`` on many lines at once.

    All arguments broadcast together.  Returns ``(eps, iterations, converged)``
    arrays; ``iterations`` counts the update steps taken per entry.
    """
    v_i, p, q, l, r, x = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (v_i, p, q, l, r, x)))
    p, q, l = p.copy(), q.copy(), l.copy()
    total = np.zeros_like(l)
    iters = np.zeros(l.shape, dtype=int)
    active = np.ones(l.shape, dtype=bool)
    for _ in range(max_iter + 1):
        e = l - (p * p + q * q) / v_i
        active &= np.abs(e) > tol
        if not active.any():
            break
        e = np.where(active, e, 0.0)
        l -= e
        p -= r * e / 2
        q -= x * e / 2
        total += e
        iters += active
    return total, iters, ~active


def epsilon_for_line(v_i: float, p: float, q: float, l: float, r: float, x: float, *, tol: float = EPS_TOL, max_iter: int = EPS_MAX_ITER) -> float:
    """Current reduction that makes one relaxed line tight again.

    Raises:
        NoConvergence: no fixed point within ``max_iter`` updates.
    """
    if not v_i > 0:
        raise ValueError("sending-end voltage must be positive")
    eps, n, ok = epsilon_iterate(v_i, p, q, l, r, x, tol=tol, max_iter=max_iter)
    if not ok:
        raise NoConvergence(f"epsilon iteration did not settle in {max_iter} steps")
    return float(eps)


# ---------------------------------------------------------------- mapping


@dataclass
class MappedPoint:
    solution: Solution
    eps: np.ndarray  # per line, pu^2
    dq: np.ndarray  # reactive shift per bus, MVAr (slack first)
    dp: np.ndarray  # active shift per bus, MW
    iterations: int = 0

    @property
    def q_correction(self) -> float:
        """Sum of ``|dQ_j|`` over non-slack buses, MVAr."""
        return float(np.abs(self.dq[1:]).sum())


def _apply_eps(grid: GridCase, v, l, pf, qf, pi, qi, eps):
    """Map relaxed states (rows) onto the tight surface with given ``eps``."""
    topo = grid.topology
    half_p = topo.r * eps / 2
    half_q = topo.x * eps / 2
    # each line sheds half of its correction at both of its end buses
    inc = topo.children.copy()
    inc[np.arange(1, topo.n_bus), np.arange(topo.n_line)] = 1.0
    dp = -(half_p @ inc.T)
    dq = -(half_q @ inc.T)
    return (v.copy(), l - eps, pf - half_p, qf - half_q, pi + dp, qi + dq, dp, dq)


def map_to_feasible(rp: RelaxedPoint, *, tol: float = EPS_TOL, max_iter: int = EPS_MAX_ITER) -> MappedPoint:
    """Restore ``l = (P^2 + Q^2) / v_i`` on every line of a relaxed state.

    Raises:
        NoConvergence: some line's epsilon iteration failed.
    """
    g = rp.grid
    topo = g.topology
    vf = rp.v[topo.from_pos]
    eps, iters, ok = epsilon_iterate(vf, rp.p_flow, rp.q_flow, rp.l, topo.r, topo.x, tol=tol, max_iter=max_iter)
    if not ok.all():
        bad = [g.line_ids[k] for k in np.flatnonzero(~ok)]
        raise NoConvergence(f"epsilon iteration did not settle on lines {bad}")
    v, l, pf, qf, pi, qi, dp, dq = _apply_eps(g, rp.v, rp.l, rp.p_flow, rp.q_flow, rp.p_inj, rp.q_inj, eps)
    sol = Solution(g, v, l, pf, qf, pi, qi, int(iters.max(initial=0)), True)
    return MappedPoint(sol, eps, dq * g.s_base, dp * g.s_base, int(iters.max(initial=0)))


# ---------------------------------------------------------------- interpolation


@dataclass
class InterpolationReport:
    axes: tuple
    points: np.ndarray  # (N, 2) axis coordinates, MW / MVAr, boundary order
    solutions: list
    is_anchor: np.ndarray
    fallback: np.ndarray
    q_correction: np.ndarray  # MVAr per point (0 for anchors and fallbacks)
    anchor_count: int
    interp_count: int
    elapsed: float
    timings: dict = field(default_factory=dict)

    @property
    def max_q_correction(self) -> float:
        return float(self.q_correction.max(initial=0.0))

    def operating_points(self) -> list:
        return [OperatingPoint.from_axes(self.axes, p) for p in self.points]


def _axis_values(sol: Solution, axes) -> list:
    op = sol.operating_point()
    return [op.get(a.bus, a.component) for a in axes]


def chord_counts(anchor_xy: np.ndarray, extra: int, cyclic: bool = True) -> list[int]:
    """Split ``extra`` points evenly over the chords; leftovers go to the
    longest chords first."""
    k = len(anchor_xy)
    n_chords = k if cyclic and k > 2 else k - 1
    if n_chords <= 0:
        return []
    lengths = [float(np.linalg.norm(anchor_xy[(i + 1) % k] - anchor_xy[i])) for i in range(n_chords)]
    base, rest = divmod(extra, n_chords)
    counts = [base] * n_chords
    for i in sorted(range(n_chords), key=lambda i: (-lengths[i], i))[:rest]:
        counts[i] += 1
    return counts


def interpolate_boundary(anchors, total: int, axes, *, tol: float = EPS_TOL, feas_tol: float = 1e-6) -> InterpolationReport:
    """Densify a closed boundary given by ordered anchor solutions.

    ``anchors`` are :class:`~hostcap.explorer.BoundaryPoint` objects or bare
    :class:`Solution` objects, in boundary order.  ``total - len(anchors)``
    points are placed at uniform chord parameters between neighbouring
    anchors (the ring is closed when there are three or more).  A chord
    point whose epsilon iteration fails, or whose mapped state violates a
    bound by more than ``feas_tol``, is replaced by a power flow at its
    chord coordinates and flagged as a fallback.
    """
    axes = parse_axes(axes)
    sols = [getattr(a, "solution", a) for a in anchors]
    if len(sols) < 2:
        raise ValueError("need at least two anchors")
    if any(s is None for s in sols):
        raise ValueError("every anchor needs a power-flow solution")
    if total < len(sols):
        raise ValueError("total must be at least the anchor count")
    grid = sols[0].grid
    for s in sols[1:]:
        if not _same_grid(grid, s.grid):
            raise GridMismatch("anchors come from different grids")

    t0 = time.perf_counter()
    xy = np.array([_axis_values(s, axes) for s in sols])
    counts = chord_counts(xy, total - len(sols))

    # build every chord point as one relaxed batch
    keys = ("v", "l", "p_flow", "q_flow", "p_inj", "q_inj")
    stacks = {k: np.array([getattr(s, k) for s in sols]) for k in keys}
    ia, ib, tt = [], [], []
    for c, m in enumerate(counts):
        for j in range(1, m + 1):
            ia.append(c)
            ib.append((c + 1) % len(sols))
            tt.append(j / (m + 1))
    ia, ib, tt = np.array(ia, dtype=int), np.array(ib, dtype=int), np.array(tt)[:, None]
    rel = {k: (1 - tt) * stacks[k][ia] + tt * stacks[k][ib] for k in keys}

    topo = grid.topology
    t_map = time.perf_counter()
    if len(tt):
        vf = rel["v"][:, topo.from_pos]
        eps, _, ok = epsilon_iterate(vf, rel["p_flow"], rel["q_flow"], rel["l"], topo.r, topo.x, tol=tol)
        eps = np.where(ok, eps, 0.0)
        v, l, pf, qf, pi, qi, dp, dq = _apply_eps(grid, rel["v"], rel["l"], rel["p_flow"], rel["q_flow"], rel["p_inj"], rel["q_inj"], eps)
        ok = ok.all(axis=1)
    else:
        ok = np.zeros(0, dtype=bool)
    mapped = []
    for n in range(len(tt)):
        sol = Solution(grid, v[n], l[n], pf[n], qf[n], pi[n], qi[n])
        good = bool(ok[n]) and check_feasibility(grid, sol, tol=feas_tol).feasible
        mapped.append((sol, good, float(np.abs(dq[n, 1:]).sum() * grid.s_base) if good else 0.0))
    map_time = time.perf_counter() - t_map

    t_pf = time.perf_counter()
    fallback_count = 0
    out_sols, out_xy, anchor_flag, fb_flag, dq_list = [], [], [], [], []
    n = 0
    for c in range(len(sols)):
        out_sols.append(sols[c])
        out_xy.append(xy[c])
        anchor_flag.append(True)
        fb_flag.append(False)
        dq_list.append(0.0)
        if c >= len(counts):
            continue
        for _ in range(counts[c]):
            sol, good, dqn = mapped[n]
            if not good:
                fallback_count += 1
                chord = (1 - tt[n, 0]) * xy[ia[n]] + tt[n, 0] * xy[ib[n]]
                rep = evaluate_point(grid, OperatingPoint.from_axes(axes, chord), tol=FEAS_TOL)
                sol = rep.solution
            out_sols.append(sol)
            out_xy.append(_axis_values(sol, axes) if sol is not None else list(chord))
            anchor_flag.append(False)
            fb_flag.append(not good)
            dq_list.append(dqn)
            n += 1
    pf_time = time.perf_counter() - t_pf
    elapsed = time.perf_counter() - t0
    if fallback_count:
        log.warning("%d of %d chord points fell back to a power flow", fallback_count, len(tt))
    return InterpolationReport(
        axes,
        np.array(out_xy, dtype=float).reshape(-1, 2),
        out_sols,
        np.array(anchor_flag),
        np.array(fb_flag),
        np.array(dq_list),
        len(sols),
        int(len(tt) - fallback_count),
        elapsed,
        {"mapping": map_time, "fallback_powerflow": pf_time},
    )
