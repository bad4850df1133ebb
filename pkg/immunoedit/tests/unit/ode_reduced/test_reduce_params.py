# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
Unit tests for :func:`immunoedit.ode_reduced.reduce_params`.
"""
import numpy as np
import pytest

from immunoedit.exceptions import InvalidParameterError
from immunoedit.model import default_params
from immunoedit.ode_reduced import reduce_params
from immunoedit.phenogrid import build_grid
from immunoedit.tests.synthetic_data_generator import (
    PERIODIC_K2,
    constant_ode_params,
    constant_params,
)


def test_constant_coefficients():
    reduced = reduce_params(
        constant_params(k2=PERIODIC_K2), 0.3, build_grid(11)
    )
    expected = constant_ode_params(PERIODIC_K2)
    for name, value in expected.to_json().items():
        assert getattr(reduced, name) == pytest.approx(value)


def test_innate_predation_scaling():
    grid = build_grid(1001)
    reduced = reduce_params(default_params(lambda_mix=0.0), 0.86, grid)
    assert reduced.r == pytest.approx(0.666 - 0.132 * 0.86 ** 2)
    assert reduced.d == pytest.approx(0.5 - 0.15 * 0.86)
    assert reduced.mu == pytest.approx((1 - 0.1 * 0.86 ** 2) / 6, rel=1e-5)
    assert reduced.nu == pytest.approx(0.45, rel=1e-6)


def test_detection_at_origin():
    grid = build_grid(1001)
    reduced = reduce_params(default_params(), 0.0, grid)
    assert reduced.omega == pytest.approx(1 - np.exp(-1), rel=1e-5)


def test_ici_scales_nu():
    grid = build_grid(101)
    params = default_params()
    treated = params.with_changes(ici=params.ici.constant(1.0))
    ratio = reduce_params(treated, 0.5, grid).nu / reduce_params(
        params, 0.5, grid
    ).nu
    assert ratio == pytest.approx(1 / 11)


@pytest.mark.parametrize("x_star", [-0.1, 1.5])
def test_phenotype_out_of_range(x_star):
    with pytest.raises(InvalidParameterError):
        reduce_params(default_params(), x_star, build_grid(11))
