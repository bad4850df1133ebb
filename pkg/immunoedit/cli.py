# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
Command line interface.

Subcommands::

    simulate    integrate the full system, classify and compare the outcome
    sweep       run a one or two axis parameter sweep in parallel
    fixedpoint  solve the limit system and report the a-priori bounds
    ode         integrate the reduced three-mass system
    periodic    run the tilted constant-coefficient system and look for
                sustained oscillations
    bounds      print the a-priori bounds and the non-extinction margin
    classify    re-classify an existing timeseries.csv

Exit codes: 0 success, 2 invalid configuration, 3 numerical instability or
non-convergence, 4 partial sweep failure.

"""
import argparse
from collections import namedtuple
from dataclasses import replace
import json
import logging
from pathlib import Path
import sys

from joblib import Parallel, delayed

from immunoedit import __version__
from immunoedit.analysis import (
    EQUILIBRIUM,
    ESCAPE,
    classify_outcome,
    classify_series,
    compare_to_prediction,
    concentration_metrics,
)
from immunoedit.asymptotics import (
    apriori_bounds,
    carrying_capacity,
    non_extinction_check,
    solve_fixed_point_adaptive,
    solve_fixed_point_innate,
)
from immunoedit.config import (
    SweepAxis,
    SweepSpec,
    apply_overrides,
    config_to_dict,
    load_config,
    preset_names,
)
from immunoedit.exceptions import (
    ConfigError,
    ImmunoeditError,
    InstabilityError,
    InsufficientDataError,
    InvalidParameterError,
)
from immunoedit.ide_solver import run_with_fallback
from immunoedit.model import IciSchedule
from immunoedit.ode_reduced import (
    detect_limit_cycle,
    interior_equilibrium,
    ode_rhs,
    ode_run,
)
from immunoedit.phenogrid import build_grid
from immunoedit import writers

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4

#: Prediction of the tumour-alone limit, shaped like a fixed-point result.
Prediction = namedtuple("Prediction", ["rho_inf", "x_inf", "converged"])


def _out_dir(config):
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _snapshot_times(config):
    times = {t for t in config.snapshot_times if 0 <= t <= config.T}
    return sorted(times | {0.0, float(config.T)})


def _solve_fixed_point(params, grid):
    if params.lambda_mix == 0:
        return solve_fixed_point_innate(params, grid)
    return solve_fixed_point_adaptive(params, grid)


def _prediction(config, grid, capacity):
    if config.tumour_alone:
        return Prediction(capacity.rho_star, capacity.x_star, True), None
    try:
        fp = _solve_fixed_point(config.params, grid)
    except InvalidParameterError as err:
        logger.warning("No fixed-point prediction: %s", err)
        return None, None
    return fp, fp.to_json()


def cmd_simulate(config):
    """
    Simulate one scenario and write its time series, density snapshots,
    outcome report and plot script.

    """
    out = _out_dir(config)
    grid = build_grid(config.grid)
    output = run_with_fallback(
        config.params,
        config.initial,
        grid,
        config.T,
        config.dt,
        fallback_dt=config.fallback_dt,
        snapshot_times=_snapshot_times(config),
        tumour_alone=config.tumour_alone,
    )
    capacity = carrying_capacity(config.params, grid)
    outcome = classify_outcome(output, capacity.rho_star, config.thresholds)

    concentration = None
    if output.rho[-1] > 0:
        concentration = concentration_metrics(output.final_state.n, grid)

    prediction, fixed_point = _prediction(config, grid, capacity)
    if prediction is None:
        comparison = {"available": False, "reason": "no prediction"}
    elif outcome.label not in (EQUILIBRIUM, ESCAPE):
        reason = "outcome is {}".format(outcome.label)
        comparison = {"available": False, "reason": reason}
    else:
        comparison = compare_to_prediction(
            output, prediction, grid, eradication=config.thresholds.eradication
        ).to_json()

    writers.write_timeseries(output, out / "timeseries.csv")
    writers.write_densities(output.snapshots, grid, out)
    writers.write_json(
        {
            "scenario": config.name,
            "outcome": outcome.to_json(),
            "concentration": (
                concentration.to_json() if concentration else None
            ),
            "carrying_capacity": {
                "rho_star": capacity.rho_star,
                "x_star": capacity.x_star,
            },
            "fixed_point": fixed_point,
            "comparison": comparison,
            "dt": output.dt,
            "fell_back_dt": output.fell_back_dt,
            "n_clamped": output.n_clamped,
        },
        out / "outcome.json",
    )
    writers.write_json(config_to_dict(config), out / "config.json")
    writers.write_plot_script(
        out,
        "simulate",
        {
            "TITLE": config.name,
            "NAME": config.name,
            "RHO_STAR": repr(capacity.rho_star),
            "T_ZOOM": repr(min(100.0, float(config.T))),
        },
    )
    logger.info(
        "Scenario %r: %s with rho(T)/rho_star = %.4g.",
        config.name,
        outcome.label,
        outcome.rho_ratio,
    )
    return EXIT_OK


def _cell_params(params, names, values):
    changes = {}
    for name, value in zip(names, values):
        if name == "ici":
            changes["ici"] = IciSchedule.constant(value)
        else:
            changes[name] = value
    return params.with_changes(**changes)


def _run_cell(config, names, values):
    sweep = config.sweep
    row = {
        "axis1": values[0],
        "axis2": values[1] if len(values) > 1 else None,
        "rho_final": None,
        "rho_ratio": None,
        "outcome": None,
        "fell_back_dt": False,
        "status": "ok",
    }
    try:
        params = _cell_params(config.params, names, values)
        grid = build_grid(config.grid)
        output = run_with_fallback(
            params,
            config.initial,
            grid,
            sweep.T,
            sweep.dt,
            fallback_dt=sweep.fallback_dt,
            tumour_alone=config.tumour_alone,
        )
        rho_star = carrying_capacity(params, grid).rho_star
        outcome = classify_outcome(output, rho_star, config.thresholds)
    except ImmunoeditError as err:
        row["status"] = "failed: {}".format(err)
        return row
    row.update(
        rho_final=outcome.rho_final,
        rho_ratio=outcome.rho_ratio,
        outcome=outcome.label,
        fell_back_dt=output.fell_back_dt,
    )
    return row


def cmd_sweep(config):
    """
    Run every cell of the sweep and write ``heatmap.csv``.

    Cells run on ``sweep.jobs`` workers; rows keep the cell order.

    """
    sweep = config.sweep
    if sweep is None:
        raise ConfigError("The configuration has no sweep.", field="sweep")
    out = _out_dir(config)
    names = [axis.name for axis in sweep.axes]
    cells = sweep.cells()
    logger.info(
        "Sweeping %s over %d cells with %d job(s).",
        " x ".join(names),
        len(cells),
        sweep.jobs,
    )
    rows = Parallel(n_jobs=sweep.jobs)(
        delayed(_run_cell)(config, names, values) for values in cells
    )
    writers.write_heatmap(rows, out / "heatmap.csv")
    writers.write_json(
        {
            "scenario": config.name,
            "axes": names,
            "T": sweep.T,
            "dt": sweep.dt,
            "fallback_dt": sweep.fallback_dt,
            "cells": len(rows),
        },
        out / "sweep.json",
    )
    writers.write_plot_script(
        out,
        "heatmap",
        {
            "TITLE": config.name,
            "AXIS1": names[0],
            "AXIS2": names[1] if len(names) > 1 else "",
        },
    )
    failed = [row for row in rows if row["status"] != "ok"]
    for row in failed:
        logger.error(
            "Cell (%s, %s) %s", row["axis1"], row["axis2"], row["status"]
        )
    return EXIT_PARTIAL if failed else EXIT_OK


def _bounds_report(config, grid):
    bounds = apriori_bounds(config.params, grid)
    holds, margin = non_extinction_check(config.params, grid)
    return {
        "rho_bar": bounds.rho_bar,
        "phi_bar": bounds.phi_bar,
        "p_bar_max": float(bounds.p_bar.max()),
        "ell_bar_max": float(bounds.ell_bar.max()),
        "omega_max": float(bounds.omega_max.max()),
        "phi_bar_x_min": float(bounds.phi_bar_x.min()),
        "phi_bar_x_max": float(bounds.phi_bar_x.max()),
        "non_extinction": {"holds": holds, "margin": margin},
    }


def cmd_fixedpoint(config):
    """Solve the limit system and write ``fixedpoint.json``."""
    out = _out_dir(config)
    grid = build_grid(config.grid)
    capacity = carrying_capacity(config.params, grid)
    fp = _solve_fixed_point(config.params, grid)
    writers.write_json(
        {
            "scenario": config.name,
            "carrying_capacity": {
                "rho_star": capacity.rho_star,
                "x_star": capacity.x_star,
            },
            "bounds": _bounds_report(config, grid),
            "fixed_point": fp.to_json(),
            "nodes": grid.nodes,
            "ell_inf": fp.ell_inf,
            "p_inf": fp.p_inf,
        },
        out / "fixedpoint.json",
    )
    return EXIT_OK if fp.converged else EXIT_NUMERICAL


def _cycle_json(values, times, window_fraction=0.4):
    try:
        report = detect_limit_cycle(
            values, times, window_fraction=window_fraction
        )
    except InsufficientDataError as err:
        return {"oscillatory": None, "reason": str(err)}
    return report.to_json()


def cmd_ode(config):
    """Integrate the reduced system and write its series and reports."""
    out = _out_dir(config)
    setup = config.ode
    trajectory = ode_run(
        setup.params,
        setup.init,
        setup.T,
        setup.dt,
        method=setup.method,
        record_every=setup.record_every,
    )
    writers.write_ode_timeseries(trajectory, out / "ode_timeseries.csv")
    writers.write_json(
        _cycle_json(trajectory.rho, trajectory.times, setup.window_fraction),
        out / "cycle.json",
    )

    final = trajectory.final_state
    equilibrium = interior_equilibrium(setup.params)
    report = {"params": setup.params.to_json(), "final_state": final}
    if equilibrium is not None:
        distance = max(abs(a - b) for a, b in zip(final, equilibrium))
        report.update(
            interior_equilibrium=equilibrium,
            residual=ode_rhs(equilibrium, setup.params),
            distance_to_equilibrium=distance,
        )
    writers.write_json(report, out / "equilibrium.json")
    writers.write_plot_script(
        out,
        "ode",
        {
            "TITLE": config.name,
            "NAME": config.name,
            "CSV": "ode_timeseries.csv",
        },
    )
    return EXIT_OK


def cmd_periodic(config, delta=None):
    """
    Tilt every model function f(z) into f(z) + delta z, integrate up to T
    and look for sustained oscillations of rho, sigma and gamma.

    """
    delta = config.delta if delta is None else delta
    if not 0 <= delta < 0.1:
        msg = "The tilt delta must lie in [0, 0.1), got {}."
        raise InvalidParameterError(msg.format(delta))
    out = _out_dir(config)
    grid = build_grid(config.grid)
    params = config.params.tilted(delta)
    output = run_with_fallback(
        params,
        config.initial,
        grid,
        config.T,
        config.dt,
        fallback_dt=config.fallback_dt,
        snapshot_times=_snapshot_times(config),
    )
    writers.write_timeseries(output, out / "timeseries.csv")
    writers.write_densities(output.snapshots, grid, out)
    cycles = {
        name: _cycle_json(getattr(output, name), output.times)
        for name in ("rho", "sigma", "gamma")
    }
    writers.write_json(
        {"scenario": config.name, "delta": delta, "cycles": cycles},
        out / "periodic.json",
    )
    writers.write_plot_script(
        out,
        "ode",
        {"TITLE": config.name, "NAME": config.name, "CSV": "timeseries.csv"},
    )
    return EXIT_OK


def cmd_bounds(config, stream=None):
    """Print the a-priori bounds and the non-extinction margin."""
    stream = sys.stdout if stream is None else stream
    grid = build_grid(config.grid)
    report = _bounds_report(config, grid)
    json.dump(writers.to_builtin(report), stream, indent=2, sort_keys=True)
    stream.write("\n")
    return EXIT_OK


def cmd_classify(config, timeseries, stream=None):
    """Classify the tumour mass of an existing ``timeseries.csv``."""
    stream = sys.stdout if stream is None else stream
    frame = writers.read_timeseries(timeseries)
    grid = build_grid(config.grid)
    rho_star = carrying_capacity(config.params, grid).rho_star
    outcome = classify_series(
        frame["t"].to_numpy(),
        frame["rho"].to_numpy(),
        rho_star,
        config.thresholds,
    )
    json.dump(writers.to_builtin(outcome.to_json()), stream, indent=2)
    stream.write("\n")
    return EXIT_OK


def _parse_axis(text):
    name, _, values = text.partition("=")
    if not values:
        msg = "Expected NAME=V1,V2,... for --axis, got {!r}."
        raise ConfigError(msg.format(text), field="sweep.axes")
    try:
        numbers = [float(value) for value in values.split(",")]
    except ValueError as err:
        raise ConfigError(str(err), field="sweep.axes") from err
    return SweepAxis(name=name.strip(), values=tuple(numbers))


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON scenario configuration.")
    common.add_argument(
        "--preset",
        choices=preset_names(),
        help="Named scenario, overridden by --config.",
    )
    common.add_argument("--out", help="Output directory.")
    common.add_argument("--grid", type=int, help="Number of grid nodes.")
    common.add_argument("--dt", type=float, help="Time step.")
    common.add_argument("--T", type=float, help="Final time.")
    common.add_argument("--jobs", type=int, help="Parallel sweep workers.")
    common.add_argument("--ici", type=float, help="Constant ICI dose.")
    common.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Log more (-v info, -vv debug).",
    )

    parser = argparse.ArgumentParser(
        prog="immunoedit",
        description="Phenotype-structured tumour-immune simulations.",
    )
    parser.add_argument(
        "--version", action="version", version="%(prog)s " + __version__
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("simulate", parents=[common], help="Run a scenario.")
    sweep = commands.add_parser(
        "sweep", parents=[common], help="Parameter sweep."
    )
    sweep.add_argument(
        "--axis",
        action="append",
        type=str,
        help="Sweep axis NAME=V1,V2,...; give once or twice.",
    )
    commands.add_parser(
        "fixedpoint", parents=[common], help="Solve the limit system."
    )
    commands.add_parser("ode", parents=[common], help="Reduced system.")
    periodic = commands.add_parser(
        "periodic", parents=[common], help="Tilted periodic experiment."
    )
    periodic.add_argument("--delta", type=float, help="Tilt, in [0, 0.1).")
    commands.add_parser("bounds", parents=[common], help="A-priori bounds.")
    classify = commands.add_parser(
        "classify", parents=[common], help="Classify a timeseries.csv."
    )
    classify.add_argument("timeseries", help="Path to timeseries.csv.")
    return parser


def _configure_logging(verbosity):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(
        level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s"
    )


def _resolve_config(args):
    config = load_config(args.config, args.preset)
    config = apply_overrides(
        config,
        grid=args.grid,
        dt=args.dt,
        T=args.T,
        out=args.out,
        jobs=args.jobs,
        ici=args.ici,
    )
    axes = getattr(args, "axis", None)
    if axes:
        base = config.sweep or SweepSpec(
            axes=(_parse_axis(axes[0]),), T=config.T, dt=config.dt
        )
        sweep = SweepSpec(
            axes=tuple(_parse_axis(text) for text in axes),
            T=base.T,
            dt=base.dt,
            fallback_dt=base.fallback_dt,
            jobs=args.jobs or base.jobs,
        )
        config = replace(config, sweep=sweep)
    return config


def main(argv=None):
    """Entry point of the ``immunoedit`` command; returns the exit code."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    try:
        config = _resolve_config(args)
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "sweep":
            return cmd_sweep(config)
        if args.command == "fixedpoint":
            return cmd_fixedpoint(config)
        if args.command == "ode":
            return cmd_ode(config)
        if args.command == "periodic":
            return cmd_periodic(config, args.delta)
        if args.command == "bounds":
            return cmd_bounds(config)
        return cmd_classify(config, args.timeseries)
    except InstabilityError as err:
        logger.error("Numerical instability: %s", err)
        return EXIT_NUMERICAL
    except ImmunoeditError as err:
        logger.error("%s", err)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
