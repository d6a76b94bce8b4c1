"""Command line entry point.

Exit codes: 0 all verdicts pass, 1 a scientific check failed (or the
integration broke down), 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy.fft

from .config import ConfigError, RunConfig, load_config, validate
from .elliptic import (
    EllipticProblem, c_constant, ma_residual, solve_elliptic, stability_gap, volume_identity,
)
from .errors import NoConvergence, NonFinite, NotAdmissible, PreconditionError, SingularMetric, Stalled
from .estimates import (
    EstimateRow, barrier_gradient, barrier_trace, check_lemma31, check_smoothing_bounds, estimate_series,
)
from .fieldio import FieldFormatError, read_csv, read_field, read_json, write_csv, write_field, write_json
from .flow import DtPolicy, log_det_ratio, metric_from_potential, run_flow
from .forcing import expression_forcing, linear_forcing, zero_forcing
from .geometry import (
    conformal_metric, flat_metric, identity_suite, perturbed_metric, refinement_ok,
)
from .grid import TensorField, band_limited_field, make_grid
from .smoothing import KinkSpec, SmoothingExperiment, cauchy_check, recovery_check, run_pipeline

log = logging.getLogger("hermflow")

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SCIENTIFIC_ERRORS = (NoConvergence, NonFinite, NotAdmissible, SingularMetric, Stalled)


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ builders

def build_grid(cfg: RunConfig, res: int | None = None):
    return make_grid(cfg.grid.n, cfg.grid.periods, res or cfg.grid.res)


def _seed(cfg: RunConfig, offset: int = 0) -> int:
    return int(cfg.seed) + offset


def _real_field(path: str, grid) -> np.ndarray:
    f = read_field(path)
    if f.grid != grid or f.signature:
        raise UsageError(f"{path}: expected a scalar field on the configured grid")
    return np.ascontiguousarray(f.values.real)


def build_metric(cfg: RunConfig, grid):
    m = cfg.metric
    seed = m.seed if m.seed is not None else _seed(cfg)
    if m.kind == "flat":
        return flat_metric(grid, m.scale)
    if m.kind == "perturbed":
        return perturbed_metric(grid, seed, m.eps, m.modes, m.axes).scaled(m.scale)
    if m.u_file:
        u = _real_field(m.u_file, grid)
    else:
        u = band_limited_field(grid, np.random.default_rng(seed), m.modes, m.axes)
        u = m.u_amplitude * u / max(np.max(np.abs(u)), 1e-300)
    return conformal_metric(grid, u + math.log(m.scale))


def build_forcing(cfg: RunConfig, grid):
    f = cfg.forcing
    if f.kind == "zero":
        return zero_forcing()
    if f.kind == "expression":
        return expression_forcing(f.expression, grid.n)
    if f.h_file:
        h = _real_field(f.h_file, grid)
    elif f.h_amplitude:
        h = band_limited_field(grid, np.random.default_rng(_seed(cfg, 1)))
        h = f.h_amplitude * h / max(np.max(np.abs(h)), 1e-300)
    else:
        h = 0.0
    return linear_forcing(f.lam, h)


def build_initial(cfg: RunConfig, grid) -> np.ndarray:
    ini = cfg.flow.initial
    if ini.kind == "zero":
        return np.zeros((1,) * grid.ndim)
    if ini.kind == "constant":
        return np.full((1,) * grid.ndim, ini.amplitude)
    if ini.kind == "cosine":
        return ini.amplitude * np.cos(grid.coords()[0])
    if ini.kind == "file":
        if not ini.file:
            raise UsageError("flow.initial.file is required for kind 'file'")
        return _real_field(ini.file, grid)
    f = band_limited_field(grid, np.random.default_rng(_seed(cfg, 2)), ini.modes)
    return ini.amplitude * f / max(np.max(np.abs(f)), 1e-300)


def _scalar(grid, phi) -> TensorField:
    return TensorField(grid, "", np.asarray(phi, dtype=complex))


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# ------------------------------------------------------------------ commands

def cmd_verify_geometry(cfg: RunConfig, out: Path) -> int:
    gc = cfg.geometry
    seeds = [_seed(cfg, i) for i in range(gc.metrics)]
    resolutions = [gc.res, 2 * gc.res] if gc.doubling else [gc.res]
    reports, failures = [], []
    by_res = {}
    for res in resolutions:
        rr = identity_suite(seeds, gc.n, res, gc.eps, gc.modes, gc.axes, workers=cfg.threads)
        by_res[res] = {(r.metric_seed, r.identity_name): r.sup_residual for r in rr}
        reports += [r.__dict__ for r in rr]
    for seed in seeds:
        base = {name: v for (s, name), v in by_res[gc.res].items() if s == seed}
        for name, v in base.items():
            if not v < gc.threshold:
                failures.append(f"seed {seed} {name}: {v:.3e} >= {gc.threshold:g}")
        if gc.doubling:
            fine = by_res[2 * gc.res]
            for name, v in base.items():
                w = fine[(seed, name)]
                if not refinement_ok(v, w, gc.shrink, gc.floor):
                    failures.append(f"seed {seed} {name}: {v:.3e} -> {w:.3e} does not shrink {gc.shrink:g}x")
    ok = not failures
    write_json(out / "geometry_report.json", {"residuals": reports, "failures": failures, "pass": ok},
               cfg.artifact_dict(), cfg.seed, _timestamp())
    for msg in failures:
        log.error(msg)
    return EXIT_PASS if ok else EXIT_FAIL


def _series_rows(series: list[EstimateRow]):
    return [r.csv_values() for r in series]


def cmd_run_flow(cfg: RunConfig, out: Path) -> int:
    grid = build_grid(cfg)
    ghat = build_metric(cfg, grid)
    F = build_forcing(cfg, grid)
    phi0 = build_initial(cfg, grid)
    policy = DtPolicy(cfl=cfg.flow.cfl, snapshot_every=cfg.flow.snapshot_every, dt_max=cfg.flow.dt_max)
    try:
        traj = run_flow(phi0, ghat, F, cfg.flow.t_end, policy, cfg.artifact_dict())
    except SCIENTIFIC_ERRORS as exc:
        write_json(out / "verdicts.json", {"error": f"{type(exc).__name__}: {exc}", "verdicts": []},
                   cfg.artifact_dict(), cfg.seed, _timestamp())
        log.error("flow failed: %s", exc)
        return EXIT_FAIL
    series = estimate_series(traj)
    write_csv(out / "trajectory.csv", EstimateRow.CSV_COLUMNS, _series_rows(series), cfg.artifact_dict(), cfg.seed,
              _timestamp())
    verdict = check_lemma31(traj, F, delta=cfg.estimates.delta)
    body = {
        "verdicts": [verdict.to_dict()],
        "barrier_gradient": [list(x) for x in barrier_gradient(traj, cfg.estimates.barrier_A)],
        "barrier_trace": [list(x) for x in barrier_trace(traj, cfg.estimates.barrier_A, cfg.estimates.barrier_alpha)],
        "argmax": [r.argmax for r in series],
        "pass": verdict.passed,
    }
    write_json(out / "verdicts.json", body, cfg.artifact_dict(), cfg.seed, _timestamp())
    write_field(out / "phi_final.mafl", _scalar(grid, grid.full(traj.snapshots[-1].phi)))
    return EXIT_PASS if verdict.passed else EXIT_FAIL


def cmd_solve_elliptic(cfg: RunConfig, out: Path) -> int:
    """Manufactured problem with forcing lam (phi - phi*) - log det ratio(phi*)."""
    ec = cfg.elliptic
    grid = build_grid(cfg)
    ghat = build_metric(cfg, grid)
    rng = np.random.default_rng(_seed(cfg, 3))
    target = band_limited_field(grid, rng, cfg.metric.modes, cfg.metric.axes)
    target = ec.manufactured_amplitude * target / max(np.max(np.abs(target)), 1e-300)
    if ec.normalization == "mean-zero":
        target = target - float(np.mean(target))
    try:
        L = log_det_ratio(metric_from_potential(ghat, target), ghat)
    except NotAdmissible as exc:
        raise UsageError(f"manufactured potential is not admissible: {exc}") from exc
    F = linear_forcing(ec.lam, ec.lam * target + L)
    problem = EllipticProblem(ghat, F, ec.normalization, reference=target)
    starts = [np.zeros((1,) * grid.ndim)]
    for k in range(1, ec.starts):
        s = band_limited_field(grid, np.random.default_rng(_seed(cfg, 100 + k)), cfg.metric.modes, cfg.metric.axes)
        starts.append(0.01 * s / max(np.max(np.abs(s)), 1e-300))
    try:
        sols = [solve_elliptic(problem, s, tol=ec.tol, max_iter=ec.max_iter, c=c_constant(target, ghat, F))
                for s in starts]
    except SCIENTIFIC_ERRORS as exc:
        write_json(out / "solve_report.json", {"error": f"{type(exc).__name__}: {exc}"}, cfg.artifact_dict(), cfg.seed,
                   _timestamp())
        log.error("solve failed: %s", exc)
        return EXIT_FAIL
    best = sols[0]
    err = float(np.max(np.abs(best.phi - target)))
    gap = stability_gap(sols[0], sols[-1], problem) if len(sols) > 1 else 0.0
    traj = run_flow(best.phi, ghat, F, 0.05, DtPolicy(snapshot_every=0.01))
    drift = max(float(np.max(np.abs(s.phi - traj.snapshots[0].phi))) for s in traj.snapshots)
    recheck = float(np.max(np.abs(ma_residual(best.phi, problem))))
    checks = {
        "residual": best.residual < ec.tol,
        "recovery_error": err < 1e-8,
        "stability_gap": gap < 1e-8,
        "flow_drift": drift < 1e-8,
    }
    body = {
        "solves": [s.to_dict() for s in sols],
        "recovery_error": err, "stability_gap": gap, "flow_drift": drift,
        "residual_recomputed": recheck, "volume_defect": volume_identity(best.phi, ghat),
        "checks": checks, "pass": all(checks.values()),
    }
    write_json(out / "solve_report.json", body, cfg.artifact_dict(), cfg.seed, _timestamp())
    write_field(out / "solution.mafl", _scalar(grid, grid.full(best.phi)))
    return EXIT_PASS if body["pass"] else EXIT_FAIL


def _level(x: float):
    return int(x) if float(x).is_integer() else float(x)


def cmd_smoothing(cfg: RunConfig, out: Path) -> int:
    sc = cfg.smoothing
    grid = build_grid(cfg)
    ghat = build_metric(cfg, grid)
    kink = KinkSpec(tuple(sc.amplitudes), tuple(sc.phases), tuple(sc.wavenumbers), sc.tau_factor, 0, sc.lam)
    exp = SmoothingExperiment(grid, ghat, kink, tuple(_level(j) for j in sc.levels), sc.t_end,
                              DtPolicy(cfl=cfg.flow.cfl, snapshot_every=sc.snapshot_every), c_factor=sc.c_factor)
    report = run_pipeline(exp)
    t_half = sc.t_end / 2
    verdicts, problems = [], []
    ok_levels = report.successful()
    if len(ok_levels) < len(exp.levels):
        problems.append("levels failed: " + ", ".join(str(lv.j) for lv in report.levels if not lv.ok))
    try:
        verdicts.append(cauchy_check(report, t_half, sc.cauchy_factor))
        verdicts.append(recovery_check(report, t_half))
        verdicts.append(check_smoothing_bounds(report.family(), t_half, sc.ratio_limit, sc.data_bound))
    except (ValueError, PreconditionError) as exc:
        problems.append(f"{type(exc).__name__}: {exc}")
    mollify_errors = [lv.mollify_error for lv in ok_levels]
    speeds = [lv.phidot0_sup for lv in ok_levels]
    ladder = {
        "mollify_error_decreasing": all(a > b for a, b in zip(mollify_errors, mollify_errors[1:])),
        "initial_speed_decreasing": all(a > b for a, b in zip(speeds, speeds[1:])),
    }
    passed = not problems and all(v.passed for v in verdicts) and all(ladder.values())
    body = {"report": report.to_dict(), "verdicts": [v.to_dict() for v in verdicts], "ladder": ladder,
            "problems": problems, "pass": passed}
    write_json(out / "smoothing_report.json", body, cfg.artifact_dict(), cfg.seed, _timestamp())
    rows = [[f"{a}-{b}"] + list(d) for (a, b), d in report.pairwise.items()]
    write_csv(out / "pairwise.csv", ["pair"] + [f"t={t:g}" for t in report.times], rows, cfg.artifact_dict(),
              cfg.seed, _timestamp())
    if sc.write_trajectories:
        for lv in ok_levels:
            write_csv(out / f"level_{lv.j}.csv", EstimateRow.CSV_COLUMNS,
                      _series_rows(estimate_series(lv.trajectory)), cfg.artifact_dict(), cfg.seed, _timestamp())
    for p in problems:
        log.error(p)
    return EXIT_PASS if passed else EXIT_FAIL


def cmd_report(input_dir: Path, out: Path) -> int:
    """Columnar, whitespace separated .dat files for gnuplot."""
    if not input_dir.is_dir():
        raise UsageError(f"input directory {input_dir} does not exist")
    written = 0
    for csv_path in sorted(input_dir.glob("*.csv")):
        header, rows = read_csv(csv_path)
        lines = ["# " + " ".join(h.replace(" ", "_") for h in header)]
        lines += [" ".join(r) for r in rows]
        (out / (csv_path.stem + ".dat")).write_text("\n".join(lines) + "\n")
        written += 1
    geo = input_dir / "geometry_report.json"
    if geo.exists():
        doc = read_json(geo)
        lines = ["# metric_seed res identity sup_residual"]
        lines += [f"{r['metric_seed']} {r['res']} {r['identity_name']} {r['sup_residual']!r}" for r in doc["residuals"]]
        (out / "residuals.dat").write_text("\n".join(lines) + "\n")
        written += 1
    if not written:
        raise UsageError(f"no reportable artifacts in {input_dir}")
    return EXIT_PASS


COMMANDS = {
    "verify-geometry": cmd_verify_geometry,
    "run-flow": cmd_run_flow,
    "solve-elliptic": cmd_solve_elliptic,
    "smoothing": cmd_smoothing,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hermflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["report"]:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, default=None)
        s.add_argument("--out", type=Path, default=None)
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--res", type=int, default=None)
        s.add_argument("--threads", type=int, default=None)
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "report":
            s.add_argument("--input", type=Path, required=True)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg.seed = args.seed
        if args.res is not None:
            if args.command == "verify-geometry":
                cfg.geometry.res = args.res
            else:
                cfg.grid.res = args.res
        if args.threads is not None:
            cfg.threads = args.threads
        if args.out is not None:
            cfg.out = str(args.out)
        validate(cfg)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        with scipy.fft.set_workers(cfg.threads):
            if args.command == "report":
                code = cmd_report(args.input, out)
            else:
                code = COMMANDS[args.command](cfg, out)
        log.info("%s finished in %.1fs with exit code %d", args.command, time.perf_counter() - t0, code)
        return code
    except (ConfigError, UsageError, FieldFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
