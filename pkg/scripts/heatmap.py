#!/usr/bin/env python3
"""Storage sizing heatmaps over the corrected 9-bus region: minimal
regulation power and two-site cost, written as matrix CSVs."""

import argparse
from pathlib import Path

import numpy as np

from hostcap.cases import ninebus
from hostcap.ess import membership_mask, sweep_heatmap
from hostcap.explorer import ExploreConfig, correct_region, explore_grid
from hostcap.io import emit_heatmap


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolution", type=int, default=101)
    ap.add_argument("--beta", type=float, default=300.0, help="bus 7 price per kWh")
    ap.add_argument("--gamma", type=float, default=650.0, help="bus 8 price per kWh")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out-dir", type=Path, default=Path("heatmaps"))
    args = ap.parse_args(argv)

    grid = ninebus()
    lin = explore_grid(grid, "bus7:P,bus8:P", "linearized", ExploreConfig(max_directions=64))
    region = correct_region(lin.region, grid)
    xs = np.linspace(-5, 5, args.resolution)
    ys = np.linspace(-50, 50, args.resolution)
    axes = ("bus7:P", "bus8:P")

    cap = sweep_heatmap(region, xs, ys, "min-apparent", workers=args.workers)
    emit_heatmap(args.out_dir / "capacity_mva.csv", xs, ys, cap, axes)
    cost = sweep_heatmap(region, xs, ys, "two-site-cost", workers=args.workers, beta=args.beta * 1e3, gamma=args.gamma * 1e3)
    emit_heatmap(args.out_dir / "cost.csv", xs, ys, cost, axes)

    inside = membership_mask(region, xs, ys)
    print(f"capacity: max {cap.max():.3f} MVA; cost: max {cost.max():,.0f}")
    print(f"zero-cost cells {(cost == 0).sum()} = region cells {inside.sum()}: {np.array_equal(cost == 0, inside)}")
    print(f"written to {args.out_dir}/")


if __name__ == "__main__":
    main()
