# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
Provides synthetic inputs for the immunoedit tests.

Concept:
  * Directory of JSON scenario templates (`config_templates/`), formatted as
    :class:`string.Template` s, including placeholders.
  * Functions to fill the placeholders and write configuration files, one
    function per template.
  * Builders of parameter sets, synthetic tumour-mass series and fake
    simulation outputs for the analysis tests.
"""

from pathlib import Path
from string import Template

import numpy as np
import pandas as pd

from immunoedit.ide_solver import SimOutput, SimState
from immunoedit.model import ModelParams
from immunoedit.ode_reduced import OdeParams
from immunoedit.phenogrid import build_grid

#: Parameters of the constant-coefficient system at its periodic regime.
PERIODIC_K2 = 0.7314
#: Parameters of the constant-coefficient system at its stable regime.
STABLE_K2 = 0.8514


def _file_from_template(temp_file_dir, name, template_name, template_subs):
    """Shared template filling behaviour.

    Substitutes placeholders in the named JSON template and saves it.
    """
    write_path = Path(temp_file_dir).joinpath(name).with_suffix(".json")
    templates_dir = Path(__file__).parent / "config_templates"
    template_filepath = templates_dir.joinpath(template_name).with_suffix(
        ".txt"
    )
    with open(template_filepath) as file:
        template_string = Template(file.read())
    with open(write_path, "w") as file:
        file.write(template_string.substitute(template_subs))
    return write_path


def create_file__scenario(
    temp_file_dir,
    name="scenario",
    grid=21,
    T=10.0,
    dt=0.1,
    lambda_mix=0.5,
    v=0.5,
    s=1.0,
    ici=0.0,
    tumour_alone=False,
):
    """Create a configuration file of the default (untreated) model."""
    subs = {
        "NAME": name,
        "GRID": int(grid),
        "T": float(T),
        "DT": float(dt),
        "LAMBDA": float(lambda_mix),
        "V": float(v),
        "S": float(s),
        "ICI": float(ici),
        "TUMOUR_ALONE": "true" if tumour_alone else "false",
    }
    return _file_from_template(temp_file_dir, name, "scenario", subs)


def create_file__constant_coefficients(
    temp_file_dir,
    name="constant",
    grid=11,
    T=10.0,
    dt=0.1,
    k2=STABLE_K2,
    delta=0.0,
    init=(1.5, 0.5, 3.0),
):
    """Create a configuration file of the constant-coefficient model."""
    rho0, sigma0, gamma0 = init
    subs = {
        "NAME": name,
        "GRID": int(grid),
        "T": float(T),
        "DT": float(dt),
        "K2": float(k2),
        "DELTA": float(delta),
        "RHO0": float(rho0),
        "SIGMA0": float(sigma0),
        "GAMMA0": float(gamma0),
    }
    return _file_from_template(
        temp_file_dir, name, "constant_coefficients", subs
    )


def untreated_params(**overrides):
    """The default untreated parameter set, with overrides."""
    return ModelParams(**overrides)


def constant_params(k2=STABLE_K2, **overrides):
    """Constant rate functions, lambda = 0 and the constant omega kernel."""
    values = dict(
        r=[1.3],
        d=[0.25],
        mu=[1.0],
        psi=[1.0],
        nu=[0.4],
        k1=0.4,
        k2=k2,
        alpha=1.0,
        lambda_mix=0.0,
        omega_kernel="constant",
    )
    values.update(overrides)
    return ModelParams(**values)


def constant_ode_params(k2=STABLE_K2):
    """The reduced system matching :func:`constant_params`."""
    return OdeParams(r=1.3, d=0.25, mu=1.0, nu=0.4, omega=1.0, k1=0.4, k2=k2)


def sinusoid_series(
    period=10.0, mean=0.5, amplitude=0.1, T=200.0, dt=0.05, decay=0.0
):
    """Sampled ``mean + amplitude exp(-decay t) sin(2 pi t / period)``."""
    times = np.arange(0.0, T + dt / 2, dt)
    values = mean + amplitude * np.exp(-decay * times) * np.sin(
        2 * np.pi * times / period
    )
    return times, values


def relaxing_series(final, start=1.0, rate=0.1, T=100.0, dt=0.1):
    """Exponential relaxation from ``start`` towards ``final``."""
    times = np.arange(0.0, T + dt / 2, dt)
    return times, final + (start - final) * np.exp(-rate * times)


def fake_output(times, rho, n_final=None, grid=None):
    """
    A :class:`~immunoedit.ide_solver.SimOutput` carrying a given tumour
    mass series, for the analysis tests.

    ``n_final`` is the final tumour density (a flat density of mass
    ``rho[-1]`` when omitted).

    """
    grid = grid if grid is not None else build_grid(11)
    times = np.asarray(times, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if n_final is None:
        n_final = np.full(grid.n_points, rho[-1])
    zeros = np.zeros(grid.n_points)
    final = SimState(t=times[-1], n=np.asarray(n_final), ell=zeros, p=zeros)
    return SimOutput(
        times=times,
        rho=rho,
        sigma=np.zeros_like(rho),
        gamma=np.zeros_like(rho),
        phi_series=np.zeros_like(rho),
        ici=np.zeros_like(rho),
        snapshots=[final],
        final_state=final,
        dt=float(times[1] - times[0]) if times.size > 1 else 1.0,
        grid=grid,
    )


def create_file__timeseries(temp_file_dir, times, rho, name="timeseries"):
    """Write a ``timeseries.csv`` with the given tumour mass."""
    write_path = Path(temp_file_dir).joinpath(name).with_suffix(".csv")
    zeros = np.zeros(len(rho))
    pd.DataFrame(
        {
            "t": times,
            "rho": rho,
            "sigma": zeros,
            "gamma": zeros,
            "ici_dose": zeros,
        }
    ).to_csv(write_path, index=False)
    return write_path
