# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
Output files of the command line tools.

  * Time series and density snapshots as CSV, written with :mod:`pandas`.
  * Density snapshots as a NetCDF file, written with :mod:`netCDF4`.
  * Reports as JSON.
  * Plot scripts filled in from the :class:`string.Template` files in
    ``plot_templates/``. The scripts only need matplotlib and pandas, and
    read the CSV files sitting next to them.

"""
import json
import logging
import math
from pathlib import Path
from string import Template

import netCDF4
import numpy as np
import pandas as pd

from immunoedit.exceptions import ConfigError

logger = logging.getLogger(__name__)

TIMESERIES_COLUMNS = ["t", "rho", "sigma", "gamma", "ici_dose"]
DENSITY_FIELDS = {"n": "x", "ell": "y", "p": "y"}

_TEMPLATES_DIR = Path(__file__).parent / "plot_templates"


def to_builtin(value):
    """Convert numpy scalars and arrays to JSON-ready values; NaN -> None."""
    if isinstance(value, dict):
        return {str(key): to_builtin(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(item) for item in value]
    if isinstance(value, np.ndarray):
        return [to_builtin(item) for item in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(payload, path):
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(to_builtin(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def timeseries_frame(output):
    return pd.DataFrame(
        {
            "t": output.times,
            "rho": output.rho,
            "sigma": output.sigma,
            "gamma": output.gamma,
            "ici_dose": output.ici,
        },
        columns=TIMESERIES_COLUMNS,
    )


def write_timeseries(output, path):
    """Write t, rho, sigma, gamma and ici_dose, one row per time step."""
    timeseries_frame(output).to_csv(path, index=False)
    return Path(path)


def read_timeseries(path):
    """Read a ``timeseries.csv`` back, checking its columns."""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as err:
        msg = "Cannot read time series {}: {}"
        raise ConfigError(msg.format(path, err)) from err
    missing = [name for name in ("t", "rho") if name not in frame.columns]
    if missing:
        msg = "Time series {} lacks column(s) {}."
        raise ConfigError(msg.format(path, missing))
    return frame


def density_frame(snapshots, grid, name):
    """Long table of one density: columns t, node, value."""
    blocks = [
        pd.DataFrame(
            {
                "t": np.full(grid.n_points, snapshot.t),
                "node": grid.nodes,
                "value": getattr(snapshot, name),
            }
        )
        for snapshot in snapshots
    ]
    if not blocks:
        return pd.DataFrame(columns=["t", "node", "value"])
    return pd.concat(blocks, ignore_index=True)


def write_densities(snapshots, grid, out_dir):
    """
    Write the snapshots of n, ell and p.

    Produces ``density_n.csv``, ``density_ell.csv``, ``density_p.csv`` and
    ``densities.nc`` in ``out_dir``.

    Returns:
        The list of written paths.

    """
    out_dir = Path(out_dir)
    paths = []
    for name in DENSITY_FIELDS:
        path = out_dir / "density_{}.csv".format(name)
        density_frame(snapshots, grid, name).to_csv(path, index=False)
        paths.append(path)
    paths.append(write_densities_netcdf(snapshots, grid, out_dir))
    return paths


def write_densities_netcdf(snapshots, grid, out_dir, filename="densities.nc"):
    path = Path(out_dir) / filename
    ds = netCDF4.Dataset(path, "w", format="NETCDF4")
    try:
        ds.Conventions = "CF-1.8"
        ds.title = "Phenotype densities of tumour and immune cells"
        ds.createDimension("time", len(snapshots))
        ds.createDimension("phenotype", grid.n_points)

        time = ds.createVariable("time", "f8", ("time",))
        time.long_name = "time"
        time.units = "1"
        time[:] = [snapshot.t for snapshot in snapshots]

        phenotype = ds.createVariable("phenotype", "f8", ("phenotype",))
        phenotype.long_name = "phenotype"
        phenotype.units = "1"
        phenotype[:] = grid.nodes

        weights = ds.createVariable("weights", "f8", ("phenotype",))
        weights.long_name = "trapezoid quadrature weights"
        weights[:] = grid.weights

        long_names = {
            "n": "tumour cell density over malignancy phenotype x",
            "ell": "competent immune cell density over efficacy phenotype y",
            "p": "naive immune cell density over efficacy phenotype y",
        }
        for name, long_name in long_names.items():
            var = ds.createVariable(name, "f8", ("time", "phenotype"))
            var.long_name = long_name
            var.units = "1"
            if snapshots:
                var[:] = np.stack([getattr(s, name) for s in snapshots])
    finally:
        ds.close()
    return path


def write_ode_timeseries(trajectory, path):
    frame = pd.DataFrame(
        {
            "t": trajectory.times,
            "rho": trajectory.rho,
            "sigma": trajectory.sigma,
            "gamma": trajectory.gamma,
        }
    )
    frame.to_csv(path, index=False)
    return Path(path)


def write_heatmap(rows, path):
    """
    Write one row per sweep cell, in cell order.

    Columns: axis1, axis2, rho_final, rho_ratio, outcome, fell_back_dt and
    status.

    """
    columns = [
        "axis1",
        "axis2",
        "rho_final",
        "rho_ratio",
        "outcome",
        "fell_back_dt",
        "status",
    ]
    frame = pd.DataFrame(list(rows), columns=columns)
    frame.to_csv(path, index=False)
    return Path(path)


def plot_template_names():
    return sorted(path.stem for path in _TEMPLATES_DIR.glob("*.txt"))


def write_plot_script(out_dir, template, substitutions):
    """
    Fill in ``plot_templates/<template>.txt`` and save it as
    ``plot_<template>.py`` in ``out_dir``.

    """
    template_path = _TEMPLATES_DIR.joinpath(template).with_suffix(".txt")
    with open(template_path) as fh:
        text = Template(fh.read()).substitute(substitutions)
    path = Path(out_dir) / "plot_{}.py".format(template)
    with open(path, "w") as fh:
        fh.write(text)
    logger.info("Wrote plot script %s.", path)
    return path
