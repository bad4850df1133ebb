# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
Unit tests for :func:`immunoedit.ide_solver.make_initial`.
"""
import numpy as np
import pytest

from immunoedit.exceptions import DimensionError, InvalidParameterError
from immunoedit.ide_solver import (
    Explicit,
    GaussianProfile,
    Uniform,
    make_initial,
)
from immunoedit.phenogrid import argmax_node, build_grid, quad


def test_gaussian_profile():
    grid = build_grid(1000)
    state = make_initial(GaussianProfile(), grid)
    assert state.t == 0.0
    assert quad(state.n, grid) == pytest.approx(1.0, abs=1e-12)
    assert grid.nodes[argmax_node(state.n)] == pytest.approx(0.5, abs=1e-3)
    assert np.all(state.ell == 0)
    assert np.allclose(state.p, 1 - grid.nodes ** 2)


def test_gaussian_target_mass():
    grid = build_grid(51)
    state = make_initial(GaussianProfile(m=0.2, target_mass=3.0), grid)
    assert state.masses(grid)[0] == pytest.approx(3.0)


@pytest.mark.parametrize(
    "kind", [GaussianProfile(e=0.0), GaussianProfile(target_mass=-1.0)]
)
def test_gaussian_invalid(kind):
    with pytest.raises(InvalidParameterError):
        make_initial(kind, build_grid(11))


def test_uniform():
    grid = build_grid(11)
    state = make_initial(Uniform(1.5, 0.5, 3.0), grid)
    assert state.masses(grid) == pytest.approx((1.5, 0.5, 3.0))


def test_explicit():
    grid = build_grid(3)
    state = make_initial(Explicit([1, 2, 3], [0, 0, 0], [1, 1, 1]), grid)
    assert np.array_equal(state.n, [1.0, 2.0, 3.0])


def test_explicit_shape():
    with pytest.raises(DimensionError):
        make_initial(Explicit([1, 2], [0, 0, 0], [1, 1, 1]), build_grid(3))


def test_negative_initial_density():
    with pytest.raises(InvalidParameterError):
        make_initial(Uniform(-1.0, 0.0, 0.0), build_grid(3))


def test_unknown_kind():
    with pytest.raises(InvalidParameterError):
        make_initial("gaussian", build_grid(3))
