# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
Unit tests for :class:`immunoedit.model.ModelParams` and
:func:`immunoedit.model.discretise`.
"""
import logging

import numpy as np
import pytest

from immunoedit.exceptions import InvalidParameterError
from immunoedit.model import (
    IciSchedule,
    ModelParams,
    default_params,
    discretise,
    evaluate_functions,
)
from immunoedit.phenogrid import PolynomialCoeffs, Tabulated, build_grid


def test_defaults():
    params = default_params()
    assert params.r == PolynomialCoeffs((0.666, 0.0, -0.132))
    assert params.k1 == 0.5 and params.k2 == 1.5
    assert params.lambda_mix == 0.5
    assert params.omega_kernel == "exponential"


def test_lists_become_polynomials():
    params = ModelParams(r=[1.3])
    assert params.r == PolynomialCoeffs([1.3])


@pytest.mark.parametrize(
    "changes",
    [
        {"k1": -0.1},
        {"k2": 0.0},
        {"alpha": -1.0},
        {"h": -1.0},
        {"lambda_mix": 1.5},
        {"v": 0.0},
        {"s": -1.0},
        {"omega_kernel": "gaussian"},
    ],
)
def test_invalid(changes):
    with pytest.raises(InvalidParameterError):
        ModelParams(**changes)


def test_error_names_parameter():
    with pytest.raises(InvalidParameterError, match="k2"):
        ModelParams(k2=0.0)


def test_with_changes():
    params = default_params().with_changes(v=0.1)
    assert params.v == 0.1
    assert params.s == 1.0


def test_tilted():
    params = ModelParams(r=[1.3], d=[0.25], mu=[1.0], psi=[1.0], nu=[0.4])
    tilted = params.tilted(0.01)
    assert tilted.r.at(1.0) == pytest.approx(1.31)
    assert tilted.nu.at(0.5) == pytest.approx(0.405)
    assert tilted.k2 == params.k2


def test_death_rate_must_be_positive():
    with pytest.raises(InvalidParameterError):
        evaluate_functions(ModelParams(d=[0.5, -0.6]), build_grid(11))


def test_negative_rate():
    with pytest.raises(InvalidParameterError):
        evaluate_functions(ModelParams(mu=[-0.1]), build_grid(11))


def test_zero_rate_warns(caplog):
    with caplog.at_level(logging.WARNING, logger="immunoedit.model"):
        values = evaluate_functions(ModelParams(psi=[0.0]), build_grid(11))
    assert np.all(values["psi"] == 0)
    assert "psi" in caplog.text


def test_default_psi_vanishes_at_zero(caplog):
    # psi = 0.5 y^2 is zero at y = 0.
    with caplog.at_level(logging.WARNING, logger="immunoedit.model"):
        evaluate_functions(default_params(), build_grid(11))
    assert "psi" in caplog.text


def test_discretise():
    grid = build_grid(21)
    model = discretise(default_params(), grid)
    assert model.grid == grid
    assert model.d[-1] == pytest.approx(0.35)
    assert model.kernels.Psi.shape == (21, 21)


def test_tabulated_functions():
    grid = build_grid(5)
    params = ModelParams(nu=Tabulated([0.5, 0.4, 0.3, 0.2, 0.1]))
    model = discretise(params, grid)
    assert np.allclose(model.nu, [0.5, 0.4, 0.3, 0.2, 0.1])


def test_nu_effective():
    grid = build_grid(5)
    params = default_params(
        h=10.0, ici=IciSchedule.piecewise([10.0], [1.0, 0.0])
    )
    model = discretise(params, grid)
    assert np.allclose(model.nu_effective(0.0), model.nu / 11.0)
    assert np.allclose(model.nu_effective(10.0), model.nu)
    assert np.allclose(model.nu_limit(), model.nu)
