"""Command-line front end.

Subcommands: design, synth, fit, align, predict, validate, bench.  All file
formats are plain CSV (plus JSON for serialized models); every command is
deterministic given its flags, config file and seed.  Exit codes: 0 success,
2 usage error, 3 inconsistent or malformed inputs, 4 numerical failure.

Environment overrides: DYNSHAPE_OUTDIR prefixes relative output paths,
DYNSHAPE_THREADS sets the worker count for blockwise estimation.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import fileio
from .doe import DesignMatrix, lhd_sample, maximin_lhd, min_pairwise_distance, scale_to_box
from .emulator import (
    FAMILIES,
    TrainConfig,
    benchmark_against_per_step,
    predict_curves,
    train,
    validate,
)
from .errors import DynshapeError, InputConsistencyError
from .gp import FitConfig, GpModel, loo_metrics
from .registration import EstimationConfig, align_curves, contrast, make_weights, to_fourier
from .synth import co2_default_box, co2_style_spec, generate_analytical, generate_functional_sim

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4

CONFIG_KEYS = {
    "seed",
    "block_size",
    "beta_exponent",
    "alpha_min",
    "alpha_max",
    "l_max",
    "multistarts",
    "max_iters",
    "gp_multistarts",
    "gp_max_iters",
    "gp_length_lo",
    "gp_length_hi",
    "gp_nugget_floor",
    "var_fix_tol",
    "time_windows",
    "threads",
}


def _out_path(path: str) -> str:
    outdir = os.environ.get("DYNSHAPE_OUTDIR")
    if outdir and not os.path.isabs(path):
        os.makedirs(outdir, exist_ok=True)
        return os.path.join(outdir, path)
    return path


def _env_threads(value: int) -> int:
    env = os.environ.get("DYNSHAPE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputConsistencyError(f"DYNSHAPE_THREADS must be an integer, got {env!r}") from None
    return value


def _load_curves(args) -> tuple:
    """Curves (and their grid) from --curves plus --times/--period/header."""
    values, header_times = fileio.read_curves_csv(args.curves)
    times = None
    period = getattr(args, "period", None)
    if getattr(args, "times", None):
        times = fileio.read_times_csv(args.times)
    elif period is None:
        times = header_times
    curves, dropped = fileio.curves_from_arrays(values, times=times, period=period)
    if dropped:
        print("warning: even number of time steps; dropped the last sample to make J odd",
              file=sys.stderr)
    return curves, dropped


def _train_config(args) -> TrainConfig:
    """Merge config-file settings and command-line flags (flags win)."""
    settings = {}
    if getattr(args, "config", None):
        settings = fileio.read_config(args.config, CONFIG_KEYS)

    def pick(flag_name, key, cast, default):
        flag = getattr(args, flag_name, None)
        if flag is not None:
            return flag
        if key in settings:
            return cast(settings[key])
        return default

    seed = int(pick("seed", "seed", int, 0))
    est = EstimationConfig(
        alpha_bounds=(
            float(pick("alpha_min", "alpha_min", float, 0.05)),
            float(pick("alpha_max", "alpha_max", float, 20.0)),
        ),
        beta_exponent=float(pick("beta_exponent", "beta_exponent", float, 1.5)),
        l_max=(lambda v: None if v in (None, "none", "") else int(v))(
            pick("l_max", "l_max", str, None)
        ),
        multistarts=int(pick("multistarts", "multistarts", int, 3)),
        max_iters=int(pick("max_iters", "max_iters", int, 1000)),
        seed=seed,
    )
    gp = FitConfig(
        length_bounds=(
            float(pick("gp_length_lo", "gp_length_lo", float, 1e-3)),
            float(pick("gp_length_hi", "gp_length_hi", float, 1e3)),
        ),
        multistarts=int(pick("gp_multistarts", "gp_multistarts", int, 8)),
        max_iters=int(pick("gp_max_iters", "gp_max_iters", int, 200)),
        nugget_floor=float(pick("gp_nugget_floor", "gp_nugget_floor", float, 1e-10)),
        seed=seed,
    )
    return TrainConfig(
        block_size=int(pick("block_size", "block_size", int, 10)),
        var_fix_tol=float(pick("var_fix_tol", "var_fix_tol", float, 1e-10)),
        time_windows=int(pick("time_windows", "time_windows", int, 1)),
        threads=_env_threads(int(pick("threads", "threads", int, 1))),
        estimation=est,
        gp=gp,
    )


# ---------------------------------------------------------------- commands


def cmd_design(args) -> None:
    if args.n < 2:
        raise argparse.ArgumentTypeError("--n must be at least 2")
    box = fileio.read_box_csv(args.box)
    if args.maximin_restarts > 0:
        design = maximin_lhd(args.n, box.dims, seed=args.seed, restarts=args.maximin_restarts)
    else:
        design = lhd_sample(args.n, box.dims, seed=args.seed)
    dist = min_pairwise_distance(design.points)
    scaled = scale_to_box(design, box)
    fileio.write_design_csv(_out_path(args.out), scaled.points)
    print(f"wrote {args.n} x {box.dims} design to {args.out}; "
          f"min pairwise distance (normalized) = {fileio.fmt(dist)}")


def cmd_synth_analytical(args) -> None:
    curves, truth = generate_analytical(args.n, args.j, args.noise_var, args.seed)
    fileio.write_curves_csv(_out_path(args.curves_out), curves)
    if args.params_out:
        fileio.write_params_csv(_out_path(args.params_out), truth)
    print(f"wrote {curves.n} x {curves.j} analytical curves to {args.curves_out}")


def cmd_synth_co2(args) -> None:
    box = fileio.read_box_csv(args.box) if args.box else co2_default_box()
    spec = co2_style_spec(j=args.j, noise_var=args.noise_var, seed=args.seed, box=box)
    points = fileio.read_design_csv(args.design)
    curves = generate_functional_sim(spec, DesignMatrix(points=points, normalized=False))
    fileio.write_curves_csv(_out_path(args.curves_out), curves)
    if args.truth_out:
        truth = np.column_stack([spec.alpha_fn(points), spec.theta_fn(points), spec.v_fn(points)])
        lines = ["alpha,theta,v"] + [",".join(fileio.fmt(x) for x in row) for row in truth]
        fileio.atomic_write_text(_out_path(args.truth_out), "\n".join(lines) + "\n")
    print(f"wrote {curves.n} x {curves.j} simulated curves to {args.curves_out}")


def cmd_fit(args) -> None:
    points = fileio.read_design_csv(args.design)
    curves, dropped = _load_curves(args)
    if points.shape[0] != curves.n:
        raise InputConsistencyError(
            f"design has {points.shape[0]} rows but the curve file has {curves.n}"
        )
    config = _train_config(args)
    design = DesignMatrix(points=points, normalized=False)
    surrogate = train(design, curves, config)

    fileio.save_surrogate(_out_path(args.surrogate_out), surrogate)
    if args.params_out:
        fileio.write_params_csv(_out_path(args.params_out), surrogate.params)
    if args.pattern_out:
        fileio.write_pattern_csv(_out_path(args.pattern_out), curves.t_grid, surrogate.pattern.values)
    if args.diagnostics_out:
        table = to_fourier(curves)
        weights = make_weights(curves.j, config.estimation.beta_exponent, config.estimation.l_max)
        lines = [
            f"contrast = {fileio.fmt(contrast(surrogate.params, table, weights))}",
            f"curves = {curves.n}",
            f"time_steps = {curves.j}",
            f"dropped_last_step = {int(dropped)}",
            f"block_size = {config.block_size}",
        ]
        for name in FAMILIES:
            model = surrogate.segments[0].models[name]
            if isinstance(model, GpModel):
                _, q2 = loo_metrics(model)
                lines.append(f"{name}_model = gp")
                lines.append(f"{name}_loo_q2 = {fileio.fmt(q2)}")
            else:
                lines.append(f"{name}_model = fixed")
                lines.append(f"{name}_fixed_value = {fileio.fmt(model)}")
        fileio.atomic_write_text(_out_path(args.diagnostics_out), "\n".join(lines) + "\n")
    print(f"trained surrogate on {curves.n} curves x {curves.j} steps -> {args.surrogate_out}")


def cmd_align(args) -> None:
    curves, _ = _load_curves(args)
    params = fileio.read_params_csv(args.params)
    if params.n != curves.n:
        raise InputConsistencyError(
            f"parameter file has {params.n} rows but the curve file has {curves.n}"
        )
    aligned = align_curves(curves, params)
    fileio.write_curves_csv(_out_path(args.out), aligned)
    print(f"wrote {aligned.n} aligned curves to {args.out}")


def cmd_predict(args) -> None:
    surrogate = fileio.load_surrogate(args.surrogate)
    points = fileio.read_design_csv(args.points)
    header = ",".join(f"t={fileio.fmt(t)}" for t in surrogate.t_grid) + ",extrapolated"
    if points.shape[0] == 0:
        fileio.atomic_write_text(_out_path(args.out), header + "\n")
        print("no prediction points; wrote header only")
        return
    if points.shape[1] != surrogate.d:
        raise InputConsistencyError(
            f"points have {points.shape[1]} columns but the surrogate expects {surrogate.d}"
        )
    values, flags = predict_curves(surrogate, points)
    lines = [header]
    for row, flag in zip(values, flags):
        lines.append(",".join(fileio.fmt(x) for x in row) + f",{int(flag)}")
    fileio.atomic_write_text(_out_path(args.out), "\n".join(lines) + "\n")
    print(f"wrote {points.shape[0]} predicted curves to {args.out}")


def _load_test_set(args):
    points = fileio.read_design_csv(args.test_design)
    values, header_times = fileio.read_curves_csv(args.test_curves)
    times = fileio.read_times_csv(args.times) if getattr(args, "times", None) else (
        header_times if getattr(args, "period", None) is None else None
    )
    curves, _ = fileio.curves_from_arrays(values, times=times, period=getattr(args, "period", None))
    if points.shape[0] != curves.n:
        raise InputConsistencyError(
            f"test design has {points.shape[0]} rows but the test curves have {curves.n}"
        )
    return DesignMatrix(points=points, normalized=False), curves


def cmd_validate(args) -> None:
    surrogate = fileio.load_surrogate(args.surrogate)
    test_design, test_curves = _load_test_set(args)
    report = validate(surrogate, test_design, test_curves)
    fileio.write_report_csv(_out_path(args.report_out), report, surrogate.t_grid)
    print(f"overall rmse = {fileio.fmt(report.overall_rmse)}; "
          f"mean q2 over unflagged steps = {fileio.fmt(report.mean_q2_unflagged)}")


def cmd_bench(args) -> None:
    points = fileio.read_design_csv(args.design)
    curves, _ = _load_curves(args)
    if points.shape[0] != curves.n:
        raise InputConsistencyError(
            f"design has {points.shape[0]} rows but the curve file has {curves.n}"
        )
    config = _train_config(args)
    design = DesignMatrix(points=points, normalized=False)
    test_design, test_curves = _load_test_set(args)
    bench = benchmark_against_per_step(design, curves, test_design, test_curves, config)

    lines = ["step,t,rmse_sim,q2_sim,flag_sim,rmse_step,q2_step,flag_step"]
    for j in range(curves.j):
        sim, step = bench.sim_report, bench.step_report
        def cell(x):
            return "nan" if np.isnan(x) else fileio.fmt(x)
        lines.append(
            f"{j + 1},{fileio.fmt(curves.t_grid[j])},"
            f"{cell(sim.per_step_rmse[j])},{cell(sim.per_step_q2[j])},{int(sim.flags[j])},"
            f"{cell(step.per_step_rmse[j])},{cell(step.per_step_q2[j])},{int(step.flags[j])}"
        )
    fileio.atomic_write_text(_out_path(args.report_out), "\n".join(lines) + "\n")

    timing_lines = [
        "stage,seconds",
        f"sim_registration,{fileio.fmt(bench.sim_registration_seconds)}",
        f"sim_parameter_models,{fileio.fmt(bench.sim_gp_seconds)}",
        f"sim_total,{fileio.fmt(bench.sim_train_seconds)}",
        f"per_step_gp_total,{fileio.fmt(bench.step_train_seconds)}",
    ]
    fileio.atomic_write_text(_out_path(args.timings_out), "\n".join(timing_lines) + "\n")

    if args.crossplot_out:
        fileio.write_crossplot_csv(
            _out_path(args.crossplot_out),
            [("sim", bench.test_values, bench.sim_predicted),
             ("per_step_gp", bench.test_values, bench.step_predicted)],
        )
    print(f"sim train {bench.sim_train_seconds:.2f}s vs per-step {bench.step_train_seconds:.2f}s; "
          f"mean q2 sim = {fileio.fmt(bench.sim_report.mean_q2_unflagged)}, "
          f"per-step = {fileio.fmt(bench.step_report.mean_q2_unflagged)}")


# ---------------------------------------------------------------- parser


def _add_curve_inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--curves", required=True, help="curves CSV (rows = curves, header t=<value>)")
    p.add_argument("--times", help="optional CSV with one time value per row")
    p.add_argument("--period", type=float, help="period, when no time grid is supplied")


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--seed", type=int)
    p.add_argument("--block-size", dest="block_size", type=int)
    p.add_argument("--beta-exponent", dest="beta_exponent", type=float)
    p.add_argument("--alpha-min", dest="alpha_min", type=float)
    p.add_argument("--alpha-max", dest="alpha_max", type=float)
    p.add_argument("--l-max", dest="l_max", type=int)
    p.add_argument("--multistarts", type=int)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--gp-multistarts", dest="gp_multistarts", type=int)
    p.add_argument("--gp-max-iters", dest="gp_max_iters", type=int)
    p.add_argument("--gp-length-lo", dest="gp_length_lo", type=float)
    p.add_argument("--gp-length-hi", dest="gp_length_hi", type=float)
    p.add_argument("--gp-nugget-floor", dest="gp_nugget_floor", type=float)
    p.add_argument("--var-fix-tol", dest="var_fix_tol", type=float)
    p.add_argument("--time-windows", dest="time_windows", type=int)
    p.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynshape",
        description="Curve-registration surrogate models for dynamic simulators",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="sample a space-filling design on a box")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--box", required=True, help="CSV of name,min,max rows")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--maximin-restarts", dest="maximin_restarts", type=int, default=20,
                   help="0 = plain Latin hypercube without maximin improvement")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_design)

    synth = sub.add_parser("synth", help="generate synthetic benchmark data")
    synth_sub = synth.add_subparsers(dest="kind", required=True)

    p = synth_sub.add_parser("analytical", help="parabola benchmark with iid uniform parameters")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--noise-var", dest="noise_var", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--curves-out", dest="curves_out", required=True)
    p.add_argument("--params-out", dest="params_out")
    p.set_defaults(func=cmd_synth_analytical)

    p = synth_sub.add_parser("co2", help="pressure-style functional simulator stand-in")
    p.add_argument("--design", required=True, help="design CSV in box coordinates")
    p.add_argument("--box", help="box CSV; defaults to the built-in demo box")
    p.add_argument("--j", type=int, default=55)
    p.add_argument("--noise-var", dest="noise_var", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--curves-out", dest="curves_out", required=True)
    p.add_argument("--truth-out", dest="truth_out", help="optional alpha,theta,v map values")
    p.set_defaults(func=cmd_synth_co2)

    p = sub.add_parser("fit", help="train a functional surrogate")
    p.add_argument("--design", required=True)
    _add_curve_inputs(p)
    _add_fit_flags(p)
    p.add_argument("--surrogate-out", dest="surrogate_out", required=True)
    p.add_argument("--params-out", dest="params_out")
    p.add_argument("--pattern-out", dest="pattern_out")
    p.add_argument("--diagnostics-out", dest="diagnostics_out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("align", help="apply the inverse deformation to curves")
    _add_curve_inputs(p)
    p.add_argument("--params", required=True, help="curve,alpha,theta,v CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("predict", help="predict full curves at new points")
    p.add_argument("--surrogate", required=True)
    p.add_argument("--points", required=True, help="points CSV in design format")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("validate", help="per-step metrics on held-out runs")
    p.add_argument("--surrogate", required=True)
    p.add_argument("--test-design", dest="test_design", required=True)
    p.add_argument("--test-curves", dest="test_curves", required=True)
    p.add_argument("--times")
    p.add_argument("--period", type=float)
    p.add_argument("--report-out", dest="report_out", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench", help="compare against one GP per time step")
    p.add_argument("--design", required=True)
    _add_curve_inputs(p)
    p.add_argument("--test-design", dest="test_design", required=True)
    p.add_argument("--test-curves", dest="test_curves", required=True)
    _add_fit_flags(p)
    p.add_argument("--report-out", dest="report_out", required=True)
    p.add_argument("--timings-out", dest="timings_out", required=True)
    p.add_argument("--crossplot-out", dest="crossplot_out")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except argparse.ArgumentTypeError as err:
        parser.error(str(err))  # exits with code 2
    except InputConsistencyError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except DynshapeError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
