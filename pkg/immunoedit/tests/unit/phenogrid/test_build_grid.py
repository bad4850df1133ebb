# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
Unit tests for :func:`immunoedit.phenogrid.build_grid` and
:func:`immunoedit.phenogrid.quad`.
"""
from hypothesis import given, strategies as st
import numpy as np
import pytest

from immunoedit.exceptions import DimensionError, InvalidGridError
from immunoedit.phenogrid import PhenotypeGrid, argmax_node, build_grid, quad


def test_three_points():
    grid = build_grid(3)
    assert np.array_equal(grid.nodes, [0.0, 0.5, 1.0])
    assert np.array_equal(grid.weights, [0.25, 0.5, 0.25])
    assert grid.spacing == 0.5


def test_thousand_points():
    grid = build_grid(1000)
    assert grid.n_points == 1000
    assert grid.spacing == pytest.approx(1 / 999)
    assert grid.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert grid.nodes[0] == 0.0 and grid.nodes[-1] == 1.0
    assert np.all(np.diff(grid.nodes) > 0)


@pytest.mark.parametrize("n_points", [2, 0, -4, 3.5])
def test_too_few_points(n_points):
    with pytest.raises(InvalidGridError):
        build_grid(n_points)


def test_read_only():
    grid = build_grid(5)
    with pytest.raises(ValueError):
        grid.nodes[0] = 1.0


def test_equality_by_size():
    assert build_grid(7) == build_grid(7)
    assert build_grid(7) != build_grid(8)
    assert isinstance(build_grid(7), PhenotypeGrid)
    assert len({build_grid(7), build_grid(7)}) == 1


def test_nearest_index():
    grid = build_grid(11)
    assert grid.nearest_index(0.0) == 0
    assert grid.nearest_index(0.86) == 9
    assert grid.nearest_index(1.3) == 10
    assert grid.nearest_index(-0.2) == 0


def test_quad_constant():
    assert quad(np.ones(17), build_grid(17)) == pytest.approx(1.0)


def test_quad_psi():
    grid = build_grid(1000)
    assert quad(0.5 * grid.nodes ** 2, grid) == pytest.approx(1 / 6, abs=1e-6)


def test_quad_naive_profile():
    grid = build_grid(1000)
    assert quad(1 - grid.nodes ** 2, grid) == pytest.approx(2 / 3, abs=1e-6)


def test_quad_length_mismatch():
    with pytest.raises(DimensionError):
        quad(np.ones(4), build_grid(5))


@given(
    st.integers(min_value=3, max_value=400),
    st.floats(min_value=-10, max_value=10),
    st.floats(min_value=-10, max_value=10),
)
def test_quad_exact_on_affine(n_points, a, b):
    grid = build_grid(n_points)
    assert quad(a + b * grid.nodes, grid) == pytest.approx(
        a + b / 2, abs=1e-12 * (1 + abs(a) + abs(b))
    )


@given(
    st.integers(min_value=3, max_value=60),
    st.floats(min_value=-5, max_value=5),
    st.floats(min_value=-5, max_value=5),
)
def test_quad_linear(n_points, a, b):
    grid = build_grid(n_points)
    f = np.sin(3 * grid.nodes)
    g = np.exp(grid.nodes)
    expected = a * quad(f, grid) + b * quad(g, grid)
    assert quad(a * f + b * g, grid) == pytest.approx(expected, abs=1e-12)


def test_quad_second_order():
    exact = 1 - np.exp(-1)
    errors = [
        abs(quad(np.exp(-build_grid(n).nodes), build_grid(n)) - exact)
        for n in (51, 101, 201)
    ]
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(np.abs(orders - 2) < 0.1)


def test_argmax_smallest_on_ties():
    assert argmax_node(np.array([0.0, 2.0, 1.0, 2.0])) == 1
