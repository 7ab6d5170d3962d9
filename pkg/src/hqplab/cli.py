"""Command-line entry point.

Subcommands: run, benchmark, fit-map, train-svm, check, bench-kernel.
Verbosity via the HQPLAB_LOG environment variable (DEBUG/INFO/WARNING).
Exit codes: 0 success, 1 runtime failure (incl. infeasible cascade),
2 bad input (missing file, parse error).
"""

import argparse
import logging
import os
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

log = logging.getLogger("hqplab")


def _setup_logging():
    level = os.environ.get("HQPLAB_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")


def bundled_path(name):
    """Path of a data file shipped with the package."""
    return resources.files("hqplab").joinpath("data", name)


def _load_config(path):
    import yaml

    from . import simulator
    from .ergomap import SubjectProfile
    from .tasks import CartesianLimits, GainSet

    raw = {}
    if path is not None:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    kwargs = {}
    for key in ("dt", "duration", "mode", "plant", "walk_step_length",
                "svm_seed", "chain_file", "human_heading"):
        if key in raw:
            kwargs[key] = raw[key]
    for key in ("q0", "hrsw_pos_halfwidth", "hrsw_orient_halfwidth",
                "hrsw_center", "walk_follow_offset", "human_position"):
        if key in raw:
            kwargs[key] = np.asarray(raw[key], dtype=float)
    if "subject_height" in raw:
        kwargs["subject"] = SubjectProfile(height=float(raw["subject_height"]))
    if "gains" in raw:
        g = raw["gains"]
        kwargs["gains"] = GainSet(
            K_p=np.full(6, float(g.get("kp", 5.0))),
            K_qp=np.full(7, float(g.get("kqp", 200.0))),
            K_qd=np.full(7, float(g.get("kqd", 20.0))))
    if "cart_vel_max" in raw:
        kwargs["cart"] = CartesianLimits(
            vel_max=np.asarray(raw["cart_vel_max"], dtype=float))
    return simulator.SimConfig(**kwargs)


def _resolve_input(path, kind):
    if path is None:
        return None
    p = Path(path)
    if not p.exists():
        bundled = bundled_path(path)
        if bundled.is_file():
            return bundled
        print(f"error: {kind} file not found: {path}", file=sys.stderr)
        raise SystemExit(2)
    return p


def cmd_run(args):
    from . import simulator
    from .errors import CascadeInfeasible

    scenario_path = _resolve_input(args.scenario, "scenario")
    config_path = _resolve_input(args.config, "config")
    try:
        events = simulator.parse_scenario(scenario_path) if scenario_path else []
        config = _load_config(config_path)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.dt is not None:
        config.dt = args.dt
    if args.duration is not None:
        config.duration = args.duration
    if args.mode is not None:
        config.mode = args.mode
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        simlog = simulator.run_scenario(config, events)
    except CascadeInfeasible as exc:
        print(f"error: cascade infeasible at t={exc.t:.6f}s", file=sys.stderr)
        exc.log.to_csv(out / "log_partial.csv")
        return 1
    simlog.to_csv(out / "log.csv")
    simlog.write_summary(out / "summary.txt")
    log.info("wrote %s (%d steps)", out / "log.csv", simlog.data.shape[0])
    return 0


def cmd_benchmark(args):
    from . import simulator
    from .errors import CascadeInfeasible

    scenario_path = _resolve_input(args.scenario, "scenario")
    config_path = _resolve_input(args.config, "config")
    try:
        events = simulator.parse_scenario(scenario_path) if scenario_path else []
        config = _load_config(config_path)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.dt is not None:
        config.dt = args.dt
    if args.duration is not None:
        config.duration = args.duration
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        report = simulator.compare_modes(config, events)
    except CascadeInfeasible as exc:
        print(f"error: cascade infeasible at t={exc.t:.6f}s", file=sys.stderr)
        return 1
    report.log_ergonomics.to_csv(out / "log_ergonomics.csv")
    report.log_benchmark.to_csv(out / "log_benchmark.csv")
    with open(out / "summary.txt", "w") as fh:
        for key, val in sorted(report.summary().items()):
            fh.write(f"{key} {val:.17g}\n")
    for key, val in sorted(report.summary().items()):
        print(f"{key} {val:.6g}")
    return 0


def cmd_fit_map(args):
    from .ergomap import ScoreGrid, fit_map_from_grid
    from .errors import DegenerateGrid

    grid_path = _resolve_input(args.grid, "grid")
    try:
        grid = ScoreGrid.from_csv(grid_path)
        fitted = fit_map_from_grid(grid)
    except (ValueError, DegenerateGrid) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    fitted.dump(args.out)
    print(f"fit_rms {fitted.meta['fit_rms']:.6g}")
    return 0


def cmd_train_svm(args):
    from . import svm
    from .errors import NonPositiveC, SingleClass

    feat_path = _resolve_input(args.features, "features")
    try:
        data = svm.LabeledSet.from_csv(feat_path)
        model = svm.train(data, C=args.C, variant=args.variant)
    except (ValueError, SingleClass, NonPositiveC) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    model.dump(args.out)
    acc = svm.training_accuracy(model, data)
    print(f"train_accuracy {acc:.4f}")
    return 0


def cmd_check(args):
    """Release-gate self-check: Jacobian FD, KKT, strictness, frames."""
    import numpy as np

    from . import checks

    results = checks.run_all()
    width = max(len(name) for name, _ in results)
    failed = 0
    for name, ok in results:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}")
        failed += 0 if ok else 1
    return 0 if failed == 0 else 1


def cmd_bench_kernel(args):
    from .benchmark import run_benchmark

    rows = run_benchmark(n_problems=args.n, seed=args.seed)
    for line in rows:
        print(line)
    return 0


def main(argv=None):
    _setup_logging()
    parser = argparse.ArgumentParser(
        prog="hqplab",
        description="Hierarchical-QP control laboratory: scenario simulation, "
                    "ergonomics maps, and the linear surface classifier.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write log CSV")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--config", default=None)
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--mode", choices=["ergonomics", "min_velocity_benchmark"])
    p_run.add_argument("--dt", type=float)
    p_run.add_argument("--duration", type=float)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.set_defaults(func=cmd_run)

    p_bench = sub.add_parser("benchmark",
                             help="run ergonomics-on/off paired comparison")
    p_bench.add_argument("--scenario", required=True)
    p_bench.add_argument("--config", default=None)
    p_bench.add_argument("--out", default="out")
    p_bench.add_argument("--dt", type=float)
    p_bench.add_argument("--duration", type=float)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.set_defaults(func=cmd_benchmark)

    p_fit = sub.add_parser("fit-map", help="fit a quadratic score map")
    p_fit.add_argument("--grid", required=True)
    p_fit.add_argument("--out", required=True)
    p_fit.set_defaults(func=cmd_fit_map)

    p_svm = sub.add_parser("train-svm", help="train the surface classifier")
    p_svm.add_argument("--features", required=True)
    p_svm.add_argument("--C", type=float, default=10.0)
    p_svm.add_argument("--variant", default="l2",
                       choices=["l1", "l2", "constrained_qp"])
    p_svm.add_argument("--out", required=True)
    p_svm.set_defaults(func=cmd_train_svm)

    p_check = sub.add_parser("check", help="run the self-check suites")
    p_check.set_defaults(func=cmd_check)

    p_kb = sub.add_parser("bench-kernel",
                          help="compare compiled and pure-Python kernels")
    p_kb.add_argument("--n", type=int, default=50)
    p_kb.add_argument("--seed", type=int, default=0)
    p_kb.set_defaults(func=cmd_bench_kernel)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
