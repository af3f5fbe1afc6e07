"""Radial grid model, DistFlow power flow and feasibility checks.

Everything inside this module works in per-unit on the case's own bases,
with squared magnitudes throughout: ``v`` is |V|^2 and ``l`` is |I|^2.
Operating points are the only quantities carried in MW / MVAr.

Sign convention: a positive bus injection is generation.  Base loads are
stored as positive consumption, so the net injection at bus ``j`` is
``op[j] - base_load[j]``.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import (
    BadBounds,
    CyclicTopology,
    DisconnectedBus,
    DuplicateId,
    GridValidationError,
    MultipleSlack,
    NegativeVoltage,
    NoConvergence,
    NoSlack,
    NotAPoc,
    SampleGridTooLarge,
)

INF = math.inf
FEAS_TOL = 1e-10
PF_TOL = 1e-11
MAX_ITER = 200
SCAN_CAP = 10**7

# sweep status codes
CONVERGED, DIVERGED, NEG_VOLTAGE = 0, 1, 2


class Axis(NamedTuple):
    """One coordinate of a region: a bus and the injected component."""

    bus: str
    component: str  # "P" or "Q"

    def __str__(self) -> str:
        return f"{self.bus}:{self.component}"

    @classmethod
    def parse(cls, text: str) -> "Axis":
        bus, sep, comp = text.strip().rpartition(":")
        comp = comp.strip().upper()
        if not sep or not bus or comp not in ("P", "Q"):
            raise ValueError(f"bad axis label {text!r}, expected '<bus>:P' or '<bus>:Q'")
        return cls(bus.strip(), comp)


def parse_axes(text: str | Sequence[str]) -> tuple[Axis, ...]:
    items = text.split(",") if isinstance(text, str) else list(text)
    return tuple(a if isinstance(a, Axis) else Axis.parse(a) for a in items)


@dataclass(frozen=True)
class Bus:
    """A grid node.  Power bounds in MW / MVAr, voltage bounds in pu^2."""

    id: str
    p_min: float = -INF
    p_max: float = INF
    q_min: float = -INF
    q_max: float = INF
    v_min: float = 0.81
    v_max: float = 1.21
    base_load_p: float = 0.0
    base_load_q: float = 0.0
    is_slack: bool = False
    is_poc: bool = False


@dataclass(frozen=True)
class Line:
    """A branch with per-unit impedance and squared-current limit."""

    from_bus: str
    to_bus: str
    r: float
    x: float
    l_max: float = INF

    @property
    def id(self) -> str:
        return f"{self.from_bus}-{self.to_bus}"


@dataclass(frozen=True)
class Topology:
    """Tree layout in breadth-first order from the slack bus.

    Bus position 0 is the slack.  Internal line ``e`` feeds bus position
    ``e + 1`` from ``parent[e + 1]``.
    """

    ids: tuple[str, ...]
    index: dict
    parent: np.ndarray
    line_order: tuple[int, ...]
    r: np.ndarray
    x: np.ndarray
    l_max: np.ndarray
    subtree: np.ndarray  # subtree[e, f] = 1 if line f is at or below line e
    children: np.ndarray  # children[j, e] = 1 if line e leaves bus j

    @property
    def n_bus(self) -> int:
        return len(self.ids)

    @property
    def n_line(self) -> int:
        return len(self.ids) - 1

    @property
    def from_pos(self) -> np.ndarray:
        return self.parent[1:]

    @property
    def z2(self) -> np.ndarray:
        return self.r**2 + self.x**2


@dataclass(frozen=True, eq=False)
class GridCase:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    s_base: float = 1.0  # MVA
    v_base: float = 1.0  # kV
    v_slack: float = 1.0  # pu^2
    name: str = ""

    def bus(self, bus_id: str) -> Bus:
        return self._bus_map[bus_id]

    @cached_property
    def _bus_map(self) -> dict:
        return {b.id: b for b in self.buses}

    @property
    def slack(self) -> Bus:
        return next(b for b in self.buses if b.is_slack)

    @property
    def pocs(self) -> tuple[Bus, ...]:
        return tuple(b for b in self.buses if b.is_poc)

    @cached_property
    def topology(self) -> Topology:
        return _build_topology(self)

    @cached_property
    def line_ids(self) -> tuple[str, ...]:
        """Line ids in internal (child bus) order."""
        return tuple(self.lines[k].id for k in self.topology.line_order)

    def bus_array(self, attr: str) -> np.ndarray:
        return np.array([getattr(self._bus_map[i], attr) for i in self.topology.ids], dtype=float)

    def replace_lines(self, lines: Sequence[Line]) -> "GridCase":
        return GridCase(tuple(self.buses), tuple(lines), self.s_base, self.v_base, self.v_slack, self.name)

    def without_current_limits(self) -> "GridCase":
        return self.replace_lines([Line(ln.from_bus, ln.to_bus, ln.r, ln.x, INF) for ln in self.lines])


@dataclass
class OperatingPoint:
    """Extra injections at points of connection, keyed by (bus, "P"|"Q")."""

    entries: dict = field(default_factory=dict)

    @classmethod
    def from_axes(cls, axes: Sequence[Axis], values: Sequence[float]) -> "OperatingPoint":
        return cls({(a.bus, a.component): float(v) for a, v in zip(axes, values)})

    def get(self, bus: str, component: str) -> float:
        return self.entries.get((bus, component), 0.0)

    def check(self, grid: GridCase) -> None:
        for bus, comp in self.entries:
            if bus not in grid._bus_map:
                raise NotAPoc(f"operating point references unknown bus {bus!r}")
            if not grid.bus(bus).is_poc:
                raise NotAPoc(f"bus {bus!r} is not a point of connection")
            if comp not in ("P", "Q"):
                raise NotAPoc(f"unknown component {comp!r} for bus {bus!r}")


@dataclass
class Solution:
    """A DistFlow state.  Arrays follow the grid's breadth-first order."""

    grid: GridCase
    v: np.ndarray
    l: np.ndarray
    p_flow: np.ndarray
    q_flow: np.ndarray
    p_inj: np.ndarray
    q_inj: np.ndarray
    iterations: int = 0
    converged: bool = True

    def voltage(self, bus: str) -> float:
        return float(self.v[self.grid.topology.index[bus]])

    def injection_mw(self, bus: str, component: str = "P") -> float:
        """Net injection in MW / MVAr (generation positive)."""
        k = self.grid.topology.index[bus]
        arr = self.p_inj if component == "P" else self.q_inj
        return float(arr[k] * self.grid.s_base)

    def operating_point(self) -> OperatingPoint:
        """Extra injections at every POC implied by this state."""
        entries = {}
        for b in self.grid.pocs:
            entries[(b.id, "P")] = self.injection_mw(b.id, "P") + b.base_load_p
            entries[(b.id, "Q")] = self.injection_mw(b.id, "Q") + b.base_load_q
        return OperatingPoint(entries)

    def loss_mw(self) -> float:
        return float(np.sum(self.grid.topology.r * self.l) * self.grid.s_base)


@dataclass(frozen=True)
class Violation:
    kind: str  # P-bound, Q-bound, V-bound, I-bound, no-convergence
    subject: str
    margin: float


@dataclass
class FeasibilityReport:
    violations: list
    margins: dict = field(default_factory=dict)  # kind -> (subject, tightest margin)
    solution: object = None

    @property
    def feasible(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.feasible

    @property
    def worst_margin(self) -> float:
        if not self.margins:
            return -INF if self.violations else INF
        return min(m for _, m in self.margins.values())


# ---------------------------------------------------------------- validation


def validate_grid(raw: GridCase) -> GridCase:
    """Return ``raw`` unchanged if it is a well formed radial case."""
    if not (raw.s_base > 0 and raw.v_base > 0):
        raise BadBounds(f"bases must be positive (s_base={raw.s_base}, v_base={raw.v_base})")
    seen = set()
    for b in raw.buses:
        if b.id in seen:
            raise DuplicateId(f"duplicate bus id {b.id!r}")
        seen.add(b.id)
        if not b.p_min <= b.p_max:
            raise BadBounds(f"bus {b.id!r}: p_min {b.p_min} > p_max {b.p_max}")
        if not b.q_min <= b.q_max:
            raise BadBounds(f"bus {b.id!r}: q_min {b.q_min} > q_max {b.q_max}")
        if not 0 < b.v_min <= b.v_max:
            raise BadBounds(f"bus {b.id!r}: need 0 < v_min <= v_max, got {b.v_min}, {b.v_max}")
    slacks = [b for b in raw.buses if b.is_slack]
    if not slacks:
        raise NoSlack("no slack bus")
    if len(slacks) > 1:
        raise MultipleSlack("more than one slack bus: " + ", ".join(repr(b.id) for b in slacks))
    slack = slacks[0]
    if not slack.v_min <= raw.v_slack <= slack.v_max:
        raise BadBounds(f"slack voltage {raw.v_slack} outside [{slack.v_min}, {slack.v_max}] at {slack.id!r}")

    adj: dict = {b.id: [] for b in raw.buses}
    line_ids = set()
    for k, ln in enumerate(raw.lines):
        for end in (ln.from_bus, ln.to_bus):
            if end not in adj:
                raise DisconnectedBus(f"line {ln.id!r} references unknown bus {end!r}")
        if ln.from_bus == ln.to_bus:
            raise CyclicTopology(f"line {ln.id!r} is a self loop")
        if ln.id in line_ids:
            raise DuplicateId(f"duplicate line {ln.id!r}")
        line_ids.add(ln.id)
        if not (ln.r >= 0 and ln.x > 0 and ln.l_max > 0):
            raise BadBounds(f"line {ln.id!r}: need r >= 0, x > 0, l_max > 0")
        adj[ln.from_bus].append((ln.to_bus, k))
        adj[ln.to_bus].append((ln.from_bus, k))

    visited = {slack.id}
    queue = deque([(slack.id, None)])
    while queue:
        node, via = queue.popleft()
        for nb, k in adj[node]:
            if k == via:
                continue
            if nb in visited:
                raise CyclicTopology(f"line {raw.lines[k].id!r} closes a cycle")
            visited.add(nb)
            queue.append((nb, k))
    missing = [b.id for b in raw.buses if b.id not in visited]
    if missing:
        raise DisconnectedBus("buses not reachable from the slack: " + ", ".join(map(repr, missing)))
    if len(raw.lines) != len(raw.buses) - 1:  # pragma: no cover - implied by the traversal
        raise CyclicTopology("line count does not match a tree")
    return raw


def _build_topology(grid: GridCase) -> Topology:
    slack = grid.slack.id
    adj: dict = {b.id: [] for b in grid.buses}
    for k, ln in enumerate(grid.lines):
        adj[ln.from_bus].append((ln.to_bus, k))
        adj[ln.to_bus].append((ln.from_bus, k))
    ids, parent, line_order = [slack], [-1], []
    index = {slack: 0}
    queue = deque([slack])
    while queue:
        node = queue.popleft()
        for nb, k in adj[node]:
            if nb in index:
                continue
            index[nb] = len(ids)
            ids.append(nb)
            parent.append(index[node])
            line_order.append(k)
            queue.append(nb)
    if len(ids) != len(grid.buses):
        raise GridValidationError("grid is not connected; run validate_grid first")
    n, m = len(ids), len(ids) - 1
    parent_arr = np.array(parent, dtype=int)
    subtree = np.zeros((m, m))
    for f in range(m):
        pos = f + 1
        while pos > 0:
            subtree[pos - 1, f] = 1.0
            pos = parent_arr[pos]
    children = np.zeros((n, m))
    children[parent_arr[1:], np.arange(m)] = 1.0
    lines = [grid.lines[k] for k in line_order]
    return Topology(
        ids=tuple(ids),
        index=index,
        parent=parent_arr,
        line_order=tuple(line_order),
        r=np.array([ln.r for ln in lines], dtype=float),
        x=np.array([ln.x for ln in lines], dtype=float),
        l_max=np.array([ln.l_max for ln in lines], dtype=float),
        subtree=subtree,
        children=children,
    )


# ---------------------------------------------------------------- injections


def net_injections(grid: GridCase, op: OperatingPoint | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-unit net injections at the non-slack buses (breadth-first order)."""
    topo = grid.topology
    if op is not None:
        op.check(grid)
    p = -grid.bus_array("base_load_p")[1:]
    q = -grid.bus_array("base_load_q")[1:]
    if op is not None:
        for (bus, comp), val in op.entries.items():
            k = topo.index[bus]
            if k == 0:
                raise NotAPoc("the slack bus cannot host an operating point")
            (p if comp == "P" else q)[k - 1] += val
    return p / grid.s_base, q / grid.s_base


def axis_injections(
    grid: GridCase,
    axes: Sequence[Axis],
    values: np.ndarray,
    base: OperatingPoint | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Batch version of :func:`net_injections` for points given on ``axes``.

    ``values`` has shape (N, len(axes)) in MW / MVAr.
    """
    OperatingPoint.from_axes(axes, [0.0] * len(axes)).check(grid)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    p0, q0 = net_injections(grid, base)
    p = np.repeat(p0[None, :], len(values), axis=0)
    q = np.repeat(q0[None, :], len(values), axis=0)
    topo = grid.topology
    for c, ax in enumerate(axes):
        k = topo.index[ax.bus]
        if k == 0:
            raise NotAPoc("the slack bus cannot be an axis")
        (p if ax.component == "P" else q)[:, k - 1] += values[:, c] / grid.s_base
    return p, q


# ---------------------------------------------------------------- power flow


@dataclass
class SweepResult:
    """Batched outcome of the backward/forward sweep (row per operating point)."""

    grid: GridCase
    v: np.ndarray
    l: np.ndarray
    p_flow: np.ndarray
    q_flow: np.ndarray
    p_inj: np.ndarray
    q_inj: np.ndarray
    status: np.ndarray
    iterations: np.ndarray

    def __len__(self) -> int:
        return len(self.status)

    @property
    def converged(self) -> np.ndarray:
        return self.status == CONVERGED

    def solution(self, i: int) -> Solution:
        return Solution(
            self.grid,
            self.v[i].copy(),
            self.l[i].copy(),
            self.p_flow[i].copy(),
            self.q_flow[i].copy(),
            self.p_inj[i].copy(),
            self.q_inj[i].copy(),
            int(self.iterations[i]),
            bool(self.status[i] == CONVERGED),
        )


def _flows(topo: Topology, v_slack, l, p_net, q_net):
    P = (topo.r * l - p_net) @ topo.subtree.T
    Q = (topo.x * l - q_net) @ topo.subtree.T
    drop = 2 * (topo.r * P + topo.x * Q) - topo.z2 * l
    v = np.empty((l.shape[0], topo.n_bus))
    v[:, 0] = v_slack
    v[:, 1:] = v_slack - drop @ topo.subtree
    return P, Q, v


def solve_batch(
    grid: GridCase,
    p_net: np.ndarray,
    q_net: np.ndarray,
    *,
    tol: float = PF_TOL,
    max_iter: int = MAX_ITER,
) -> SweepResult:
    """Backward/forward sweep for many injection vectors at once.

    Rows that do not reach ``max |l - (P^2+Q^2)/v| <= tol`` within
    ``max_iter`` sweeps are flagged DIVERGED; rows whose voltages stay
    non-positive after repeated damping are flagged NEG_VOLTAGE.  Damping
    starts at 1 and is halved whenever the residual grows three sweeps in a
    row.
    """
    topo = grid.topology
    p_net = np.atleast_2d(np.asarray(p_net, dtype=float))
    q_net = np.atleast_2d(np.asarray(q_net, dtype=float))
    N, m = p_net.shape[0], topo.n_line
    frm = topo.from_pos

    l = np.zeros((N, m))
    l_prev = l.copy()
    damping = np.ones(N)
    growth = np.zeros(N, dtype=int)
    last_res = np.full(N, INF)
    status = np.full(N, -1)
    iters = np.zeros(N, dtype=int)
    out_P, out_Q = np.zeros((N, m)), np.zeros((N, m))
    out_v = np.full((N, topo.n_bus), float(grid.v_slack))
    out_l = np.zeros((N, m))

    active = np.arange(N)
    for it in range(max_iter + 1):
        if active.size == 0:
            break
        la = l[active]
        P, Q, v = _flows(topo, grid.v_slack, la, p_net[active], q_net[active])
        vf = v[:, frm]
        bad = ~np.all(v > 0, axis=1) | ~np.all(np.isfinite(v), axis=1)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            l_calc = (P**2 + Q**2) / vf
            res = np.max(np.abs(l_calc - la), axis=1) if m else np.zeros(len(active))
        bad |= ~np.isfinite(res)

        done = ~bad & (res <= tol)
        idx = active[done]
        out_P[idx], out_Q[idx], out_v[idx], out_l[idx] = P[done], Q[done], v[done], la[done]
        status[idx] = CONVERGED
        iters[idx] = it

        # rows with invalid voltages: step back and halve damping
        ib = active[bad]
        damping[ib] *= 0.5
        l[ib] = l_prev[ib]
        status[ib[damping[ib] < 2.0**-10]] = NEG_VOLTAGE

        go = ~bad & ~done
        ig = active[go]
        grew = res[go] > last_res[ig]
        growth[ig] = np.where(grew, growth[ig] + 1, 0)
        halve = growth[ig] >= 3
        damping[ig[halve]] *= 0.5
        growth[ig[halve]] = 0
        last_res[ig] = res[go]
        l_prev[ig] = la[go]
        l[ig] = la[go] + damping[ig, None] * (l_calc[go] - la[go])
        if it == max_iter:
            status[ig] = DIVERGED
        active = active[status[active] == -1]
    status[status == -1] = DIVERGED
    iters[status != CONVERGED] = max_iter

    p_inj = np.zeros((N, topo.n_bus))
    q_inj = np.zeros((N, topo.n_bus))
    p_inj[:, 1:] = p_net
    q_inj[:, 1:] = q_net
    p_inj[:, 0] = out_P @ topo.children[0]
    q_inj[:, 0] = out_Q @ topo.children[0]
    return SweepResult(grid, out_v, out_l, out_P, out_Q, p_inj, q_inj, status, iters)


def solve_power_flow(
    grid: GridCase,
    op: OperatingPoint | None = None,
    *,
    tol: float = PF_TOL,
    max_iter: int = MAX_ITER,
) -> Solution:
    """Exact DistFlow state for one operating point.

    Raises:
        NoConvergence: the sweep did not settle within ``max_iter``.
        NegativeVoltage: voltages stayed non-positive despite damping.
    """
    p, q = net_injections(grid, op)
    res = solve_batch(grid, p[None, :], q[None, :], tol=tol, max_iter=max_iter)
    if res.status[0] == NEG_VOLTAGE:
        raise NegativeVoltage("voltage collapsed to a non-positive value during the sweep")
    if res.status[0] != CONVERGED:
        raise NoConvergence(f"power flow did not converge in {max_iter} iterations")
    return res.solution(0)


def distflow_residuals(grid: GridCase, sol) -> dict:
    """Max absolute residual of each exact DistFlow equation (flow balance P,
    flow balance Q, voltage drop, current definition), in per-unit."""
    topo = grid.topology
    out = {"p_balance": 0.0, "q_balance": 0.0, "voltage": 0.0, "current": 0.0, "slack": 0.0}
    for e in range(topo.n_line):
        j = e + 1
        i = topo.parent[j]
        down = [f for f in range(topo.n_line) if topo.parent[f + 1] == j]
        r, x = topo.r[e], topo.x[e]
        rp = sol.p_flow[e] - (sum(sol.p_flow[f] for f in down) + r * sol.l[e] - sol.p_inj[j])
        rq = sol.q_flow[e] - (sum(sol.q_flow[f] for f in down) + x * sol.l[e] - sol.q_inj[j])
        rv = sol.v[j] - (sol.v[i] - 2 * (r * sol.p_flow[e] + x * sol.q_flow[e]) + (r * r + x * x) * sol.l[e])
        rl = sol.l[e] - (sol.p_flow[e] ** 2 + sol.q_flow[e] ** 2) / sol.v[i]
        out["p_balance"] = max(out["p_balance"], abs(rp))
        out["q_balance"] = max(out["q_balance"], abs(rq))
        out["voltage"] = max(out["voltage"], abs(rv))
        out["current"] = max(out["current"], abs(rl))
    root = [f for f in range(topo.n_line) if topo.parent[f + 1] == 0]
    out["slack"] = max(
        abs(sol.p_inj[0] - sum(sol.p_flow[f] for f in root)),
        abs(sol.q_inj[0] - sum(sol.q_flow[f] for f in root)),
    )
    return out


# ---------------------------------------------------------------- feasibility


def bound_margins(grid: GridCase, v, l, p_inj, q_inj) -> dict:
    """Signed distance to the nearest bound of each family, per element.

    Works on single states or batches (leading axis).  Negative entries are
    violations.  Units: pu for powers, pu^2 for ``v`` and ``l``.
    """
    sb = grid.s_base
    with np.errstate(invalid="ignore"):
        mp = np.minimum(p_inj - grid.bus_array("p_min") / sb, grid.bus_array("p_max") / sb - p_inj)
        mq = np.minimum(q_inj - grid.bus_array("q_min") / sb, grid.bus_array("q_max") / sb - q_inj)
    mv = np.minimum(v - grid.bus_array("v_min"), grid.bus_array("v_max") - v)
    mi = grid.topology.l_max - l
    return {"P-bound": mp, "Q-bound": mq, "V-bound": mv, "I-bound": mi}


def _report(grid: GridCase, margins: dict, solution, tol: float) -> FeasibilityReport:
    topo = grid.topology
    violations, tight = [], {}
    for kind, arr in margins.items():
        names = topo.ids if kind != "I-bound" else grid.line_ids
        arr = np.asarray(arr, dtype=float)
        if arr.size == 0:
            continue
        k = int(np.argmin(arr))
        tight[kind] = (names[k], float(arr[k]))
        for name, m in zip(names, arr):
            if m < -tol:
                violations.append(Violation(kind, name, float(m)))
    return FeasibilityReport(violations, tight, solution)


def check_feasibility(
    grid: GridCase, sol: Solution, op: OperatingPoint | None = None, *, tol: float = FEAS_TOL
) -> FeasibilityReport:
    """Evaluate the power, voltage and current bounds of a converged state.

    ``op`` is accepted for symmetry with :func:`evaluate_point`; the
    injections are read from ``sol`` itself.
    """
    margins = bound_margins(grid, sol.v, sol.l, sol.p_inj, sol.q_inj)
    return _report(grid, margins, sol, tol)


def evaluate_point(grid: GridCase, op: OperatingPoint | None = None, *, tol: float = FEAS_TOL) -> FeasibilityReport:
    """Solve then check.  A failed power flow is reported, never raised."""
    try:
        sol = solve_power_flow(grid, op)
    except (NoConvergence, NegativeVoltage):
        return FeasibilityReport([Violation("no-convergence", "powerflow", -INF)], {}, None)
    return check_feasibility(grid, sol, op, tol=tol)


def evaluate_batch(grid: GridCase, p_net, q_net, *, tol: float = FEAS_TOL) -> tuple[np.ndarray, np.ndarray, SweepResult]:
    """Vectorised exact evaluator: feasibility mask and worst margin per row."""
    res = solve_batch(grid, p_net, q_net)
    margins = bound_margins(grid, res.v, res.l, res.p_inj, res.q_inj)
    worst = np.min(np.concatenate([np.nan_to_num(m, nan=-INF) for m in margins.values()], axis=1), axis=1)
    worst = np.where(res.converged, worst, -INF)
    return worst >= -tol, worst, res


# ---------------------------------------------------------------- ergodic scans


@dataclass
class ViScan:
    """Points produced by the reverse (v, l) scan, stored as stacked arrays.

    Indexing yields ``(OperatingPoint, Solution)`` pairs.  The operating
    point lists the POC buses only; injections at other buses are in the
    solution and generally differ from their base loads.
    """

    grid: GridCase
    v: np.ndarray
    l: np.ndarray
    p_flow: np.ndarray
    q_flow: np.ndarray
    p_inj: np.ndarray
    q_inj: np.ndarray

    def __len__(self) -> int:
        return len(self.v)

    def __getitem__(self, i: int) -> tuple[OperatingPoint, Solution]:
        sol = Solution(self.grid, self.v[i], self.l[i], self.p_flow[i], self.q_flow[i], self.p_inj[i], self.q_inj[i])
        return sol.operating_point(), sol

    def __iter__(self) -> Iterator[tuple[OperatingPoint, Solution]]:
        for i in range(len(self)):
            yield self[i]

    def injections_mw(self, bus: str) -> tuple[np.ndarray, np.ndarray]:
        """Extra (P, Q) injection at ``bus`` for every point, MW / MVAr."""
        k = self.grid.topology.index[bus]
        b = self.grid.bus(bus)
        return self.p_inj[:, k] * self.grid.s_base + b.base_load_p, self.q_inj[:, k] * self.grid.s_base + b.base_load_q


def line_flow_roots(v_i, v_j, l, r, x):
    """Both (P, Q) flow solutions of one line for given end voltages and current.

    Returns ``(P_plus, Q_plus, P_minus, Q_minus, disc)``; entries are NaN
    where the discriminant is negative.
    """
    a = -r / x
    b = (v_i - v_j + (r * r + x * x) * l) / (2 * x)
    A = 1 + a * a
    B = 2 * a * b
    C = b * b - v_i * l
    disc = B * B - 4 * A * C
    scale = B * B + np.abs(4 * A * C)
    disc = np.where(np.abs(disc) <= 1e-14 * scale, 0.0, disc)
    with np.errstate(invalid="ignore"):
        s = np.sqrt(disc)
    pp = (-B + s) / (2 * A)
    pm = (-B - s) / (2 * A)
    return pp, a * pp + b, pm, a * pm + b, disc


def ergodic_vi_scan(
    grid: GridCase,
    v_samples: Mapping[str, Sequence[float]],
    l_samples: Mapping[str, Sequence[float]],
    *,
    cap: int = SCAN_CAP,
) -> ViScan:
    """Reverse ergodic test: sample voltages and currents, solve for injections.

    Every non-slack bus needs a voltage sample list (pu^2) and every line a
    squared-current list (pu^2); the slack defaults to the case's fixed
    voltage.  All sign choices of the per-line quadratic roots are
    enumerated, so the work grows as 2^lines; practical only for small
    feeders.  A double root is emitted once.
    """
    topo = grid.topology
    v_lists = []
    for k, bid in enumerate(topo.ids):
        if bid in v_samples:
            v_lists.append(np.asarray(v_samples[bid], dtype=float))
        elif k == 0:
            v_lists.append(np.array([grid.v_slack]))
        else:
            raise KeyError(f"missing voltage samples for bus {bid!r}")
    l_lists = []
    for lid in grid.line_ids:
        if lid not in l_samples:
            raise KeyError(f"missing current samples for line {lid!r}")
        l_lists.append(np.asarray(l_samples[lid], dtype=float))

    n_combo = math.prod(len(a) for a in v_lists + l_lists)
    m = topo.n_line
    if n_combo * 2**m > cap:
        raise SampleGridTooLarge(f"{n_combo} sample combinations x 2^{m} root choices exceeds cap {cap}")
    mesh = np.meshgrid(*(v_lists + l_lists), indexing="ij")
    flat = [g.ravel() for g in mesh]
    V = np.stack(flat[: topo.n_bus], axis=1)
    L = np.stack(flat[topo.n_bus :], axis=1) if m else np.zeros((len(V), 0))

    frm = topo.from_pos
    pp, qp, pm, qm, disc = line_flow_roots(V[:, frm], V[:, 1:], L, topo.r, topo.x)
    real = np.all(disc >= 0, axis=1)

    chunks = []
    for signs in itertools.product((True, False), repeat=m):
        signs = np.array(signs, dtype=bool)
        ok = real & np.all(signs | (disc > 0), axis=1)
        if not ok.any():
            continue
        P = np.where(signs, pp, pm)[ok]
        Q = np.where(signs, qp, qm)[ok]
        Lk = L[ok]
        p_inj = P @ topo.children.T
        q_inj = Q @ topo.children.T
        p_inj[:, 1:] += topo.r * Lk - P
        q_inj[:, 1:] += topo.x * Lk - Q
        chunks.append((V[ok], Lk, P, Q, p_inj, q_inj))
    if not chunks:
        empty_b, empty_l = np.zeros((0, topo.n_bus)), np.zeros((0, m))
        return ViScan(grid, empty_b, empty_l, empty_l, empty_l.copy(), empty_b, empty_b.copy())
    cols = [np.concatenate(c) for c in zip(*chunks)]
    return ViScan(grid, *cols)


@dataclass
class PQScan:
    """Feasibility lattice.  ``mask[i, j]`` refers to ``coords[0][i], coords[1][j]``."""

    axes: tuple
    coords: list
    mask: np.ndarray
    margin: np.ndarray

    @property
    def cell_area(self) -> float:
        return float(np.prod([c[1] - c[0] if len(c) > 1 else 1.0 for c in self.coords]))

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.coords, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)


def ergodic_pq_scan(
    grid: GridCase,
    axes: Sequence[Axis],
    ranges: Sequence[tuple[float, float, int]],
    *,
    base: OperatingPoint | None = None,
    cap: int = SCAN_CAP,
    evaluator=None,
) -> PQScan:
    """Brute-force lattice of exact feasibility over one or two axes.

    ``ranges`` holds ``(lo, hi, n)`` per axis in MW / MVAr.  Components not
    on an axis stay at ``base`` (default: no extra integration).
    ``evaluator`` may replace the exact model with any batch evaluator of
    signature ``(grid, p_net, q_net) -> (mask, margin, ...)``.
    """
    axes = tuple(axes)
    if not 1 <= len(axes) <= 2 or len(ranges) != len(axes):
        raise ValueError("need one or two axes with one range each")
    coords = [np.linspace(lo, hi, int(n)) for lo, hi, n in ranges]
    total = math.prod(len(c) for c in coords)
    if total > cap:
        raise SampleGridTooLarge(f"lattice of {total} points exceeds cap {cap}")
    mesh = np.meshgrid(*coords, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    p, q = axis_injections(grid, axes, pts, base)
    mask, margin, *_ = (evaluator or evaluate_batch)(grid, p, q)
    shape = tuple(len(c) for c in coords)
    return PQScan(axes, coords, mask.reshape(shape), margin.reshape(shape))


def line_loading(sol: Solution) -> dict:
    """Current loading per line as a percentage of its limit."""
    topo = sol.grid.topology
    with np.errstate(divide="ignore"):
        pct = 100.0 * np.sqrt(sol.l / topo.l_max)
    return dict(zip(sol.grid.line_ids, map(float, pct)))
