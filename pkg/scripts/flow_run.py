"""Single flow run with the monitored estimate series and the speed envelope.

    python scripts/flow_run.py --n 1 --res 64 --lam 1 --t-end 0.1
"""
import argparse

import numpy as np

from hermflow.estimates import barrier_trace, check_lemma31, estimate_series
from hermflow.flow import DtPolicy, run_flow
from hermflow.forcing import linear_forcing, zero_forcing
from hermflow.geometry import flat_metric, perturbed_metric
from hermflow.grid import band_limited_field, make_grid


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--res", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--amplitude", type=float, default=0.2)
    ap.add_argument("--lam", type=float, default=0.0, help="F = lam * phi - h; 0 means F = 0")
    ap.add_argument("--h-amplitude", type=float, default=0.0)
    ap.add_argument("--perturbed", action="store_true", help="use a random non-Kähler background")
    ap.add_argument("--t-end", type=float, default=0.1)
    ap.add_argument("--every", type=float, default=0.01)
    args = ap.parse_args()

    grid = make_grid(args.n, None, args.res)
    ghat = perturbed_metric(grid, args.seed) if args.perturbed else flat_metric(grid)
    rng = np.random.default_rng(args.seed + 2)
    phi0 = band_limited_field(grid, rng)
    phi0 *= args.amplitude / np.max(np.abs(phi0))
    if args.lam == 0 and args.h_amplitude == 0:
        F = zero_forcing()
    else:
        h = band_limited_field(grid, np.random.default_rng(args.seed + 1))
        F = linear_forcing(args.lam, args.h_amplitude * h / np.max(np.abs(h)))
    traj = run_flow(phi0, ghat, F, args.t_end, DtPolicy(snapshot_every=args.every))

    print(f"{'t':>6} {'sup|phi|':>10} {'sup|phidot|':>12} {'rho':>10} {'trace':>9} {'S':>10} {'|Ric|':>10} {'H_tr':>9}")
    htr = barrier_trace(traj, 10.0, 1.0)
    for row, (_, h_val, _) in zip(estimate_series(traj), htr):
        print(f"{row.t:>6.3f} {row.sup_phi:>10.4f} {row.sup_phidot:>12.4e} {row.sup_rho:>10.4f} "
              f"{row.trace_max:>9.4f} {row.S_max:>10.3e} {row.ric_max:>10.3e} {h_val:>9.4f}")
    v = check_lemma31(traj, F)
    print(f"\nspeed envelope (C = {v.constants['C']:.3f}): {'pass' if v.passed else 'FAIL'}, margin {v.margin:.3e}")


if __name__ == "__main__":
    main()
