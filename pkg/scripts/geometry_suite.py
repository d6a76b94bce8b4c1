"""Identity residuals on seeded non-Kähler metrics at two resolutions.

    python scripts/geometry_suite.py --metrics 20 --res 32 --workers 4
"""
import argparse
import time
from collections import defaultdict

from hermflow.geometry import identity_suite, refinement_ok


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--metrics", type=int, default=20)
    ap.add_argument("--res", type=int, default=32)
    ap.add_argument("--eps", type=float, default=0.05)
    ap.add_argument("--axes", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--no-doubling", action="store_true")
    args = ap.parse_args()

    seeds = list(range(args.metrics))
    worst = {}
    for res in [args.res] if args.no_doubling else [args.res, 2 * args.res]:
        t0 = time.perf_counter()
        reports = identity_suite(seeds, 2, res, args.eps, axes=tuple(args.axes), workers=args.workers)
        print(f"res {res}: {len(reports)} residuals in {time.perf_counter() - t0:.1f}s")
        by_name = defaultdict(float)
        for r in reports:
            by_name[r.identity_name] = max(by_name[r.identity_name], r.sup_residual)
        worst[res] = dict(by_name)

    names = sorted(worst[args.res])
    cols = sorted(worst)
    print(f"\n{'identity':<26}" + "".join(f"{'res ' + str(c):>14}" for c in cols) + ("   shrink ok" if len(cols) > 1 else ""))
    for name in names:
        row = f"{name:<26}" + "".join(f"{worst[c][name]:>14.3e}" for c in cols)
        if len(cols) > 1:
            row += f"   {refinement_ok(worst[cols[0]][name], worst[cols[1]][name])}"
        print(row)


if __name__ == "__main__":
    main()
