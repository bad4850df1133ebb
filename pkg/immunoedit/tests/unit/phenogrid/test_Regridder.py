# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
Unit tests for :class:`immunoedit.phenogrid.Regridder`.
"""
import os

import numpy as np
import pytest
import scipy.sparse

from immunoedit.exceptions import DimensionError
from immunoedit.phenogrid import Regridder, build_grid


def expected_weights():
    relative_path = os.path.join(
        "..", "..", "results", "test_phenogrid", "regrid_3_to_5.txt"
    )
    abs_path = os.path.join(os.path.dirname(__file__), relative_path)
    return np.loadtxt(abs_path)


def test_Regridder_init():
    rg = Regridder(build_grid(3), build_grid(5))
    assert scipy.sparse.issparse(rg.weight_matrix)
    assert np.allclose(rg.weight_matrix.toarray(), expected_weights())


def test_Regridder_regrid():
    rg = Regridder(build_grid(3), build_grid(5))
    result = rg.regrid(np.array([1.0, 3.0, 2.0]))
    assert np.allclose(result, [1.0, 2.0, 3.0, 2.5, 2.0])


def test_Regridder_affine_exact():
    src, tgt = build_grid(11), build_grid(37)
    result = Regridder(src, tgt).regrid(2.0 - 3.0 * src.nodes)
    assert np.allclose(result, 2.0 - 3.0 * tgt.nodes)


def test_Regridder_identity():
    grid = build_grid(9)
    values = np.random.default_rng(0).random(9)
    assert np.allclose(Regridder(grid, grid).regrid(values), values)


def test_Regridder_wrong_source_length():
    with pytest.raises(DimensionError):
        Regridder(build_grid(3), build_grid(5)).regrid(np.ones(4))
