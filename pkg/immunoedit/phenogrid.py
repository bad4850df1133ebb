# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
Uniform discretisation of the phenotype interval [0, 1].

Provides the shared grid used for both the tumour phenotype x and the
immune phenotype y, trapezoid quadrature, function specifications
evaluated on the grid, and a sparse regridder to transfer grid data
between two resolutions.

"""
from collections import namedtuple

import numpy as np
from numpy.polynomial import polynomial
import scipy.sparse

from immunoedit.exceptions import (
    DimensionError,
    InvalidGridError,
    InvalidParameterError,
)


class PhenotypeGrid(
    namedtuple("PhenotypeGrid", ["n_points", "nodes", "weights"])
):
    """
    A closed uniform grid on [0, 1] with composite trapezoid weights.

    * n_points (int):
        Number of nodes, at least 3.
    * nodes (:class:`numpy.ndarray`):
        Node positions, ``nodes[0] == 0`` and ``nodes[-1] == 1``.
    * weights (:class:`numpy.ndarray`):
        Quadrature weights, half a spacing at both ends.

    Build instances with :func:`build_grid`.

    """

    # The arrays make the default tuple comparison ambiguous, and a uniform
    # closed grid is entirely determined by its size anyway.
    def __eq__(self, other):
        if not isinstance(other, PhenotypeGrid):
            return NotImplemented
        return self.n_points == other.n_points

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    def __hash__(self):
        return hash(("PhenotypeGrid", self.n_points))

    @property
    def spacing(self):
        return 1.0 / (self.n_points - 1)

    def nearest_index(self, x):
        """Index of the node closest to phenotype ``x``."""
        index = int(round(float(x) * (self.n_points - 1)))
        return min(max(index, 0), self.n_points - 1)


def build_grid(n_points):
    """
    Build the uniform closed grid on [0, 1].

    Args:

    * n_points
        Number of nodes. Must be an integer of at least 3.

    Returns:
        A :class:`PhenotypeGrid`.

    For example:

    >>> grid = build_grid(3)
    >>> [float(value) for value in grid.weights]
    [0.25, 0.5, 0.25]

    """
    if int(n_points) != n_points or n_points < 3:
        msg = "A phenotype grid needs at least 3 points, got {!r}."
        raise InvalidGridError(msg.format(n_points))
    n_points = int(n_points)
    nodes = np.linspace(0.0, 1.0, n_points)
    weights = np.full(n_points, 1.0 / (n_points - 1))
    weights[[0, -1]] *= 0.5
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return PhenotypeGrid(n_points=n_points, nodes=nodes, weights=weights)


def _check_aligned(values, grid):
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_points,):
        msg = "Expected values of shape {}, got shape {} instead."
        raise DimensionError(msg.format((grid.n_points,), values.shape))
    return values


def quad(values, grid):
    """
    Integrate grid values over [0, 1] with the trapezoid rule.

    >>> float(quad(np.ones(5), build_grid(5)))
    1.0

    """
    values = _check_aligned(values, grid)
    return float(grid.weights @ values)


def argmax_node(values):
    """Index of the largest entry, the smallest index on ties."""
    return int(np.argmax(values))


class PolynomialCoeffs(namedtuple("PolynomialCoeffs", ["coeffs"])):
    """
    A polynomial on [0, 1], coefficients in ascending degree.

    """

    def __new__(cls, coeffs):
        coeffs = tuple(float(c) for c in np.atleast_1d(coeffs))
        if not coeffs:
            raise InvalidParameterError("A polynomial needs a coefficient.")
        return super().__new__(cls, coeffs)

    def evaluate(self, grid):
        return polynomial.polyval(grid.nodes, self.coeffs)

    def at(self, x):
        return float(polynomial.polyval(float(x), self.coeffs))

    def tilted(self, delta):
        coeffs = list(self.coeffs) + [0.0] * max(0, 2 - len(self.coeffs))
        coeffs[1] += delta
        return PolynomialCoeffs(coeffs)

    def to_json(self):
        return list(self.coeffs)


class Tabulated(namedtuple("Tabulated", ["values"])):
    """
    Samples of a function at the nodes of a uniform grid on [0, 1].

    """

    def __new__(cls, values):
        values = np.array(values, dtype=float)
        if values.ndim != 1 or values.size < 3:
            msg = "Tabulated values must be a vector of 3 or more samples."
            raise InvalidParameterError(msg)
        values.flags.writeable = False
        return super().__new__(cls, values)

    def __eq__(self, other):
        if not isinstance(other, Tabulated):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    __hash__ = None

    def evaluate(self, grid):
        if self.values.size != grid.n_points:
            msg = "Tabulated function has {} samples but the grid has {}."
            raise DimensionError(msg.format(self.values.size, grid.n_points))
        return self.values.copy()

    def at(self, x):
        own_nodes = np.linspace(0.0, 1.0, self.values.size)
        return float(np.interp(float(x), own_nodes, self.values))

    def tilted(self, delta):
        own_nodes = np.linspace(0.0, 1.0, self.values.size)
        return Tabulated(self.values + delta * own_nodes)

    def to_json(self):
        return {"tabulated": [float(v) for v in self.values]}


def eval_function(spec, grid):
    """
    Evaluate a function specification at every node of ``grid``.

    Args:

    * spec
        A :class:`PolynomialCoeffs` or :class:`Tabulated`.
    * grid
        The :class:`PhenotypeGrid` to evaluate on.

    Returns:
        A float vector of length ``grid.n_points``.

    """
    values = spec.evaluate(grid)
    if not np.all(np.isfinite(values)):
        raise InvalidParameterError(
            "Function {!r} is not finite on the grid.".format(spec)
        )
    return values


def _interpolation_weights(src, tgt):
    # Every target node falls in one source cell [j, j + 1] and takes the
    # two linear interpolation weights of that cell's end nodes.
    position = tgt.nodes * (src.n_points - 1)
    left = np.clip(np.floor(position).astype(int), 0, src.n_points - 2)
    fraction = position - left
    rows = np.repeat(np.arange(tgt.n_points), 2)
    columns = np.stack([left, left + 1], axis=1).ravel()
    weights = np.stack([1.0 - fraction, fraction], axis=1).ravel()
    matrix = scipy.sparse.csr_matrix(
        (weights, (rows, columns)), shape=(tgt.n_points, src.n_points)
    )
    return matrix


class Regridder:
    def __init__(self, src, tgt):
        """
        Creates a regridder transferring grid data from a source
        phenotype grid to a target phenotype grid by linear interpolation.

        Args:

        * src
            The :class:`PhenotypeGrid` data is given on.
        * tgt
            The :class:`PhenotypeGrid` data is wanted on.

        """
        self.src = src
        self.tgt = tgt
        self.weight_matrix = _interpolation_weights(src, tgt)

    def regrid(self, src_array):
        """
        Transfer a vector of source-grid values onto the target grid.

        """
        src_array = _check_aligned(src_array, self.src)
        return np.asarray(self.weight_matrix @ src_array).ravel()
