import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hostcap.cases import random_radial_grid
from hostcap.grid import OperatingPoint, axis_injections, evaluate_batch, parse_axes, solve_power_flow
from hostcap.linearized import (
    check_linearized_feasibility,
    evaluate_batch_linearized,
    evaluate_point_linearized,
    linearized_residuals,
    lossless_injections,
    solve_linearized,
    solve_linearized_batch,
)

AXES = parse_axes("bus7:P,bus8:P")


def test_zero_injection_flat_profile(rng):
    g = random_radial_grid(rng, 6)
    s = solve_linearized_batch(g, np.zeros((1, 5)), np.zeros((1, 5)))
    assert np.all(s.v == g.v_slack) and np.all(s.p_flow == 0) and np.all(s.q_flow == 0)
    assert check_linearized_feasibility(g, solve_linearized(g, OperatingPoint()))


def test_two_bus_hand_arithmetic(pu2):
    s = solve_linearized(pu2, OperatingPoint({("1", "P"): -0.5}))
    assert s.p_flow[0] == 0.5 and s.q_flow[0] == 0.0
    assert s.v[1] == pytest.approx(1.0 - 2 * (0.01 * 0.5), abs=1e-15)


def test_current_bound_is_closed(pu2):
    g = pu2.replace_lines([pu2.lines[0].__class__("0", "1", 0.01, 0.01, 0.25)])
    # P_flow = 0.5 -> v0 = 1 so (P^2 + Q^2) / v0 = 0.25 = l_max exactly
    rep = evaluate_point_linearized(g, OperatingPoint({("1", "P"): -0.5}))
    assert rep.margins["I-bound"][1] == 0.0 and rep.feasible


def test_equations_exact(nine, rng):
    pts = rng.uniform([-3, -40], [5, 40], size=(20, 2))
    p, q = axis_injections(nine, AXES, pts)
    s = solve_linearized_batch(nine, p, q)
    for i in range(len(pts)):
        one = type(s)(nine, s.v[i], s.p_flow[i], s.q_flow[i], s.p_inj[i], s.q_inj[i])
        assert max(linearized_residuals(nine, one).values()) <= 1e-14


def test_deep_interior_points_are_exact_feasible(nine, rng):
    """Linearized margin larger than the loss band implies exact feasibility."""
    pts = rng.uniform([-1.0, -20], [2.0, 20], size=(200, 2))
    p, q = axis_injections(nine, AXES, pts)
    lin, worst, _ = evaluate_batch_linearized(nine, p, q)
    exact, _, _ = evaluate_batch(nine, p, q)
    band = np.max(nine.topology.r * nine.topology.l_max)
    deep = worst > band
    assert deep.sum() > 50
    assert np.all(exact[deep])


def test_under_estimation_band(nine, rng):
    topo = nine.topology
    bound = topo.r * topo.l_max
    for x in rng.uniform([-1.5, -30], [2.5, 38], size=(50, 2)):
        sol = solve_power_flow(nine, OperatingPoint.from_axes(AXES, x))
        hat = lossless_injections(nine, sol)
        assert np.all(hat[1:] <= sol.p_inj[1:] + 1e-12)
        assert np.all(sol.p_inj[1:] <= hat[1:] + bound + 1e-12)


@settings(max_examples=40)
@given(seed=st.integers(0, 2**32 - 1), t=st.floats(0, 1))
def test_convex_combinations_stay_feasible(seed, t):
    """Random feasible pairs of the linearized model; every mix is feasible."""
    rng = np.random.default_rng(seed)
    g = random_radial_grid(rng)
    n = len(g.buses) - 1
    pts = rng.normal(scale=0.4, size=(40, n))
    mask, _, _ = evaluate_batch_linearized(g, pts, np.zeros_like(pts))
    good = pts[mask]
    if len(good) < 2:
        return
    a, b = good[0], good[1]
    mixes = np.array([(1 - s) * a + s * b for s in np.append(np.linspace(0, 1, 11), t)])
    ok, _, _ = evaluate_batch_linearized(g, mixes, np.zeros_like(mixes))
    assert ok.all()
