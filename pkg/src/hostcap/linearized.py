"""Lossless (linearized) DistFlow with the convex current inequality.

Flows are the negated sums of downstream injections and voltages follow
from a single forward pass, so no iteration is involved.  The current
constraint ``(P^2 + Q^2) / v_i <= l_max`` uses the sending-end voltage of
the same linearized solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    FEAS_TOL,
    INF,
    FeasibilityReport,
    GridCase,
    OperatingPoint,
    Solution,
    _report,
    bound_margins,
    net_injections,
)


@dataclass
class LinSolution:
    grid: GridCase
    v: np.ndarray
    p_flow: np.ndarray
    q_flow: np.ndarray
    p_inj: np.ndarray
    q_inj: np.ndarray

    @property
    def current_sq(self) -> np.ndarray:
        """``(P^2 + Q^2) / v_i`` per line; +inf where ``v_i <= 0``."""
        vf = self.v[..., self.grid.topology.from_pos]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.p_flow**2 + self.q_flow**2) / vf
        return np.where(vf > 0, out, INF)


def solve_linearized_batch(grid: GridCase, p_net, q_net) -> LinSolution:
    """Rows of ``p_net`` / ``q_net`` are per-unit injections at non-slack buses."""
    topo = grid.topology
    p_net = np.atleast_2d(np.asarray(p_net, dtype=float))
    q_net = np.atleast_2d(np.asarray(q_net, dtype=float))
    P = -p_net @ topo.subtree.T
    Q = -q_net @ topo.subtree.T
    v = np.empty((len(p_net), topo.n_bus))
    v[:, 0] = grid.v_slack
    v[:, 1:] = grid.v_slack - (2 * (topo.r * P + topo.x * Q)) @ topo.subtree
    p_inj = np.empty_like(v)
    q_inj = np.empty_like(v)
    p_inj[:, 1:], q_inj[:, 1:] = p_net, q_net
    p_inj[:, 0] = P @ topo.children[0]
    q_inj[:, 0] = Q @ topo.children[0]
    return LinSolution(grid, v, P, Q, p_inj, q_inj)


def solve_linearized(grid: GridCase, op: OperatingPoint | None = None) -> LinSolution:
    p, q = net_injections(grid, op)
    s = solve_linearized_batch(grid, p, q)
    return LinSolution(grid, s.v[0], s.p_flow[0], s.q_flow[0], s.p_inj[0], s.q_inj[0])


def linearized_residuals(grid: GridCase, lsol: LinSolution) -> dict:
    """Max residual of the three lossless equalities, computed edge by edge."""
    topo = grid.topology
    out = {"p_balance": 0.0, "q_balance": 0.0, "voltage": 0.0}
    for e in range(topo.n_line):
        j, i = e + 1, topo.parent[e + 1]
        down = [f for f in range(topo.n_line) if topo.parent[f + 1] == j]
        rp = lsol.p_flow[e] - (sum(lsol.p_flow[f] for f in down) - lsol.p_inj[j])
        rq = lsol.q_flow[e] - (sum(lsol.q_flow[f] for f in down) - lsol.q_inj[j])
        rv = lsol.v[j] - (lsol.v[i] - 2 * (topo.r[e] * lsol.p_flow[e] + topo.x[e] * lsol.q_flow[e]))
        out["p_balance"] = max(out["p_balance"], abs(rp))
        out["q_balance"] = max(out["q_balance"], abs(rq))
        out["voltage"] = max(out["voltage"], abs(rv))
    return out


def check_linearized_feasibility(grid: GridCase, lsol: LinSolution, *, tol: float = FEAS_TOL) -> FeasibilityReport:
    margins = bound_margins(grid, lsol.v, lsol.current_sq, lsol.p_inj, lsol.q_inj)
    return _report(grid, margins, lsol, tol)


def evaluate_point_linearized(grid: GridCase, op: OperatingPoint | None = None, *, tol: float = FEAS_TOL) -> FeasibilityReport:
    return check_linearized_feasibility(grid, solve_linearized(grid, op), tol=tol)


def evaluate_batch_linearized(grid: GridCase, p_net, q_net, *, tol: float = FEAS_TOL):
    """Vectorised counterpart of :func:`evaluate_point_linearized`."""
    s = solve_linearized_batch(grid, p_net, q_net)
    margins = bound_margins(grid, s.v, s.current_sq, s.p_inj, s.q_inj)
    worst = np.min(np.concatenate([np.nan_to_num(m, nan=-INF) for m in margins.values()], axis=1), axis=1)
    return worst >= -tol, worst, s


def lossless_injections(grid: GridCase, sol: Solution) -> np.ndarray:
    """Injections the lossless flow balance assigns to the flows of ``sol``.

    For bus ``j`` fed by line ``(i, j)`` this is ``sum_k P_jk - P_ij``,
    i.e. the exact injection minus ``r_ij * l_ij``.  Entry 0 (slack) is the
    sum of the slack's outgoing flows.
    """
    topo = grid.topology
    out = sol.p_flow @ topo.children.T
    out[1:] -= sol.p_flow
    return out
