"""Bundled grid cases and a random radial grid generator."""

from __future__ import annotations

import math
from importlib import resources

import numpy as np

from .grid import Bus, GridCase, Line, validate_grid
from .io import grid_from_dict, _load_json

BUNDLED = {"ninebus": "ninebus.json", "two_bus": "two_bus.json"}


def case_path(name: str):
    return resources.files("hostcap") / "data" / BUNDLED[name]


def load_case(name: str) -> GridCase:
    """``"ninebus"`` (reconstructed MV branch) or ``"two_bus"``."""
    path = case_path(name)
    return grid_from_dict(_load_json(path), name)


def ninebus() -> GridCase:
    return load_case("ninebus")


def two_bus(current_limit: bool = True) -> GridCase:
    """Slack plus one receiver over 2 km of 240 AL cable (402 A)."""
    g = load_case("two_bus")
    return g if current_limit else g.without_current_limits()


def two_bus_pu(r: float = 0.01, x: float = 0.01, v_slack: float = 1.0, l_max: float = math.inf) -> GridCase:
    """Two-bus case given directly in per-unit (s_base = 1)."""
    buses = (
        Bus("0", is_slack=True, v_min=0.81, v_max=1.21),
        Bus("1", is_poc=True, v_min=0.81, v_max=1.21),
    )
    return validate_grid(GridCase(buses, (Line("0", "1", r, x, l_max),), 1.0, 1.0, v_slack, "two-bus pu"))


def random_radial_grid(rng: np.random.Generator, n_bus: int | None = None, *, max_bus: int = 12) -> GridCase:
    """Random tree on ``n_bus`` buses (slack ``"0"``) with light per-unit loading.

    Each new bus hangs off a uniformly chosen earlier bus.  Impedances and
    loads are scaled so that the base case is comfortably solvable.
    """
    n = int(n_bus if n_bus is not None else rng.integers(2, max_bus + 1))
    buses = [Bus("0", is_slack=True, v_min=0.81, v_max=1.21)]
    lines = []
    for k in range(1, n):
        p = float(rng.uniform(0.0, 0.3 / n))
        q = float(p * rng.uniform(-0.3, 0.5))
        buses.append(Bus(str(k), v_min=0.81, v_max=1.21, base_load_p=p, base_load_q=q, is_poc=bool(rng.random() < 0.5)))
        parent = int(rng.integers(0, k))
        r = float(rng.uniform(0.002, 0.03))
        x = float(rng.uniform(0.002, 0.03))
        lines.append(Line(str(parent), str(k), r, x, float(rng.uniform(0.05, 1.0))))
    order = rng.permutation(len(lines))
    lines = [lines[i] for i in order]
    return validate_grid(GridCase(tuple(buses), tuple(lines), 1.0, 1.0, float(rng.uniform(0.95, 1.1)), f"random-{n}"))
