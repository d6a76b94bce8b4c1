"""Mollification ladder for the kinked stationary solution, with the
per-level table and the Cauchy, recovery and uniform-bound verdicts.

    python scripts/smoothing_ladder.py --res 256 --levels 8 16 32 64
"""
import argparse
import time

from hermflow.estimates import check_smoothing_bounds
from hermflow.flow import DtPolicy
from hermflow.geometry import flat_metric
from hermflow.grid import make_grid
from hermflow.smoothing import KinkSpec, SmoothingExperiment, cauchy_check, recovery_check, run_pipeline


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--res", type=int, default=256)
    ap.add_argument("--levels", type=float, nargs="+", default=[8, 16, 32, 64])
    ap.add_argument("--t-end", type=float, default=0.1)
    ap.add_argument("--tau-factor", type=float, default=2.0)
    ap.add_argument("--c-factor", type=float, default=1.0, help="scale c_j inside the flow (2 = sabotage)")
    args = ap.parse_args()

    grid = make_grid(1, None, args.res)
    ghat = flat_metric(grid)
    levels = tuple(int(j) if float(j).is_integer() else j for j in args.levels)
    exp = SmoothingExperiment(grid, ghat, KinkSpec(tau_factor=args.tau_factor), levels, args.t_end,
                              DtPolicy(snapshot_every=args.t_end / 10), c_factor=args.c_factor)
    t0 = time.perf_counter()
    rep = run_pipeline(exp)
    print(f"pipeline {time.perf_counter() - t0:.1f}s, base residual {rep.base_residual:.2e}\n")
    print(f"{'j':>6} {'|phi_j-phi|':>12} {'c_j - 1':>11} {'|psi_j-phi|':>12} {'sup|phidot0|':>13} {'newton':>7}")
    for lv in rep.levels:
        if not lv.ok:
            print(f"{lv.j:>6} failed: {lv.error}")
            continue
        print(f"{lv.j:>6} {lv.mollify_error:>12.3e} {lv.c - 1:>11.2e} {lv.psi_error:>12.3e} "
              f"{lv.phidot0_sup:>13.3e} {lv.newton_iterations:>7d}")
    t = args.t_end / 2
    for v in (cauchy_check(rep, t), recovery_check(rep, t), check_smoothing_bounds(rep.family(), t)):
        print(f"\n{v.name}: {'pass' if v.passed else 'FAIL'} (margin {v.margin:.3e})")
        for k, val in v.constants.items():
            print(f"  {k}: {val}")


if __name__ == "__main__":
    main()
