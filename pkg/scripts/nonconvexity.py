#!/usr/bin/env python3
"""Two-bus non-convexity witness: without a current limit some midpoints of
feasible P-Q pairs are infeasible; with the 402 A limit none are."""

import argparse

import numpy as np

from hostcap.cases import two_bus
from hostcap.grid import Axis, axis_injections, ergodic_pq_scan, evaluate_batch

AXES = [Axis("receiver", "P"), Axis("receiver", "Q")]


def bad_midpoints(grid, half_width, n, pairs, rng):
    scan = ergodic_pq_scan(grid, AXES, [(-half_width, half_width, n)] * 2)
    pts = scan.points()[scan.mask.ravel()]
    idx = rng.integers(0, len(pts), size=(pairs, 2))
    a, b = pts[idx[:, 0]], pts[idx[:, 1]]
    p, q = axis_injections(grid, AXES, (a + b) / 2)
    ok, _, _ = evaluate_batch(grid, p, q)
    return len(pts), a[~ok], b[~ok]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--pairs", type=int, default=10_000)
    ap.add_argument("--resolution", type=int, default=200)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)

    for limited, width in ((False, 400.0), (True, 8.0)):
        n, a, b = bad_midpoints(two_bus(current_limit=limited), width, args.resolution, args.pairs, rng)
        label = "402 A limit" if limited else "no current limit"
        print(f"{label}: {n} feasible lattice points, {len(a)} of {args.pairs} midpoints infeasible")
        if len(a):
            print(f"  witness: {a[0].round(3).tolist()} and {b[0].round(3).tolist()} (MW, MVAr)")


if __name__ == "__main__":
    main()
