# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
The reduced three-mass system at its stable and periodic regimes, run
through the ``ode`` command.
"""
import json

import pandas as pd
import pytest

from immunoedit.cli import EXIT_OK, main


def run_preset(preset, out):
    assert main(["ode", "--preset", preset, "--out", str(out)]) == EXIT_OK
    with open(out / "cycle.json") as fh:
        cycle = json.load(fh)
    with open(out / "equilibrium.json") as fh:
        equilibrium = json.load(fh)
    return cycle, equilibrium


def test_stable_regime(tmp_path):
    cycle, equilibrium = run_preset("ode-stable", tmp_path)
    assert not cycle["oscillatory"]
    final = equilibrium["final_state"]
    for value, expected in zip(final, (0.6257, 1.1436, 0.746)):
        assert value == pytest.approx(expected, abs=0.02)


def test_periodic_regime(tmp_path):
    cycle, equilibrium = run_preset("ode-periodic", tmp_path)
    assert cycle["oscillatory"]
    assert cycle["n_peaks"] >= 3
    assert cycle["amplitude"] > 0.4
    # The orbit circles an unstable interior equilibrium.
    assert equilibrium["interior_equilibrium"][0] == pytest.approx(
        0.5204, abs=1e-4
    )
    series = pd.read_csv(tmp_path / "ode_timeseries.csv")
    assert series["t"].iloc[-1] == pytest.approx(5000.0)
