# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
Model parameters, localisation kernels and coupling integrals.

The tumour density n(t, x) is preyed upon through

    phi(t, x) = int Psi_lambda(x, y) ell(t, y) dy,
    Psi_lambda(x, y) = ((1 - lambda) + lambda / v exp(-|x - y| / v)) psi(y),

and naive immune cells are stimulated through

    chi(t, y) = int omega(x, y) n(t, x) dx,
    omega(x, y) = alpha / s exp(-|x - y| / s).

Neither exponential kernel is renormalised on [0, 1].

"""
from collections import namedtuple
from dataclasses import dataclass, field, fields, replace
import logging

import numpy as np

from immunoedit.exceptions import DimensionError, InvalidParameterError
from immunoedit.phenogrid import PolynomialCoeffs, eval_function

logger = logging.getLogger(__name__)

#: Recognised shapes of the detection kernel omega.
OMEGA_KERNELS = ("exponential", "constant")

#: Rate functions of the untreated runs, ascending coefficients.
DEFAULT_FUNCTIONS = {
    "r": (0.666, 0.0, -0.132),
    "d": (0.5, -0.15),
    "mu": (1.0, 0.0, -0.1),
    "psi": (0.0, 0.0, 0.5),
    "nu": (0.5, -0.1),
}

#: Constants of the untreated runs.
DEFAULT_CONSTANTS = {
    "k1": 0.5,
    "k2": 1.5,
    "alpha": 1.0,
    "h": 10.0,
    # Not rate constants: the mixed response of the baseline runs, the
    # equilibrium case of the (s, v) presets.
    "lambda_mix": 0.5,
    "v": 0.5,
    "s": 1.0,
}

FUNCTION_NAMES = ("r", "d", "mu", "psi", "nu")


@dataclass(frozen=True)
class IciSchedule:
    """
    Immune checkpoint inhibitor dose as a function of time.

    ``kind`` is "constant" (``dose`` at all times) or "piecewise": a
    right-continuous step function taking ``doses[i]`` on
    ``[breakpoints[i - 1], breakpoints[i])``, so ``doses`` has one more
    entry than ``breakpoints``. Every dose lies in ``[0, max_dose]``; when
    ``max_dose`` is omitted it is the largest scheduled dose.

    """

    kind: str = "constant"
    dose: float = 0.0
    breakpoints: tuple = ()
    doses: tuple = ()
    max_dose: float = None

    def __post_init__(self):
        object.__setattr__(
            self, "breakpoints", tuple(float(b) for b in self.breakpoints)
        )
        object.__setattr__(self, "doses", tuple(float(d) for d in self.doses))
        if self.kind == "constant":
            scheduled = (float(self.dose),)
        elif self.kind == "piecewise":
            if len(self.doses) != len(self.breakpoints) + 1:
                msg = (
                    "A piecewise schedule needs one more dose than "
                    "breakpoints, got {} doses and {} breakpoints."
                )
                raise InvalidParameterError(
                    msg.format(len(self.doses), len(self.breakpoints))
                )
            if np.any(np.diff(self.breakpoints) <= 0):
                raise InvalidParameterError(
                    "Schedule breakpoints must be strictly increasing."
                )
            scheduled = self.doses
        else:
            msg = "Unknown ICI schedule kind {!r}."
            raise InvalidParameterError(msg.format(self.kind))
        if self.max_dose is None:
            object.__setattr__(self, "max_dose", max(scheduled))
        if min(scheduled) < 0 or max(scheduled) > self.max_dose:
            msg = "ICI doses {} must lie within [0, {}]."
            raise InvalidParameterError(msg.format(scheduled, self.max_dose))

    @classmethod
    def constant(cls, dose, max_dose=None):
        return cls(kind="constant", dose=float(dose), max_dose=max_dose)

    @classmethod
    def piecewise(cls, breakpoints, doses, max_dose=None):
        return cls(
            kind="piecewise",
            breakpoints=tuple(breakpoints),
            doses=tuple(doses),
            max_dose=max_dose,
        )

    def at(self, t):
        if self.kind == "constant":
            return float(self.dose)
        index = np.searchsorted(self.breakpoints, t, side="right")
        return self.doses[index]

    def limit_dose(self):
        """The dose held after the last breakpoint."""
        if self.kind == "constant":
            return float(self.dose)
        return self.doses[-1]

    def to_json(self):
        if self.kind == "constant":
            result = {"kind": "constant", "dose": float(self.dose)}
        else:
            result = {
                "kind": "piecewise",
                "breakpoints": list(self.breakpoints),
                "doses": list(self.doses),
            }
        result["max_dose"] = float(self.max_dose)
        return result


def ici_dose(schedule, t):
    """ICI dose delivered at time ``t``."""
    return schedule.at(t)


@dataclass(frozen=True)
class ModelParams:
    """
    All functions and constants of the tumour-immune system.

    The five rate functions are :class:`~immunoedit.phenogrid.
    PolynomialCoeffs` or :class:`~immunoedit.phenogrid.Tabulated`
    specifications. ``omega_kernel`` selects the exponential detection
    kernel or the constant kernel omega = alpha.

    """

    r: object = field(
        default_factory=lambda: PolynomialCoeffs(DEFAULT_FUNCTIONS["r"])
    )
    d: object = field(
        default_factory=lambda: PolynomialCoeffs(DEFAULT_FUNCTIONS["d"])
    )
    mu: object = field(
        default_factory=lambda: PolynomialCoeffs(DEFAULT_FUNCTIONS["mu"])
    )
    psi: object = field(
        default_factory=lambda: PolynomialCoeffs(DEFAULT_FUNCTIONS["psi"])
    )
    nu: object = field(
        default_factory=lambda: PolynomialCoeffs(DEFAULT_FUNCTIONS["nu"])
    )
    k1: float = DEFAULT_CONSTANTS["k1"]
    k2: float = DEFAULT_CONSTANTS["k2"]
    alpha: float = DEFAULT_CONSTANTS["alpha"]
    h: float = DEFAULT_CONSTANTS["h"]
    lambda_mix: float = DEFAULT_CONSTANTS["lambda_mix"]
    v: float = DEFAULT_CONSTANTS["v"]
    s: float = DEFAULT_CONSTANTS["s"]
    ici: IciSchedule = field(default_factory=IciSchedule)
    omega_kernel: str = "exponential"

    def __post_init__(self):
        for name in FUNCTION_NAMES:
            value = getattr(self, name)
            if not hasattr(value, "evaluate"):
                object.__setattr__(self, name, PolynomialCoeffs(value))
        checks = [
            ("k1", self.k1 >= 0, "must be >= 0"),
            ("k2", self.k2 > 0, "must be > 0"),
            ("alpha", self.alpha >= 0, "must be >= 0"),
            ("h", self.h >= 0, "must be >= 0"),
            ("lambda_mix", 0 <= self.lambda_mix <= 1, "must be in [0, 1]"),
            ("v", self.v > 0, "must be > 0"),
            ("s", self.s > 0, "must be > 0"),
        ]
        for name, ok, requirement in checks:
            if not ok:
                msg = "Parameter {} = {!r} {}."
                raise InvalidParameterError(
                    msg.format(name, getattr(self, name), requirement)
                )
        if self.omega_kernel not in OMEGA_KERNELS:
            msg = "Unknown omega kernel {!r}, expected one of {}."
            raise InvalidParameterError(
                msg.format(self.omega_kernel, OMEGA_KERNELS)
            )

    def with_changes(self, **changes):
        return replace(self, **changes)

    def tilted(self, delta):
        """Copy with every rate function f(z) replaced by f(z) + delta z."""
        changes = {
            name: getattr(self, name).tilted(delta) for name in FUNCTION_NAMES
        }
        return replace(self, **changes)


def default_params(**overrides):
    """Parameters of the untreated runs, with overrides."""
    return ModelParams(**overrides)


def params_field_names():
    return [f.name for f in fields(ModelParams)]


def evaluate_functions(params, grid):
    """
    Evaluate the five rate functions on ``grid`` and check their signs.

    d must be positive everywhere. The others must be nonnegative; a zero
    value is tolerated with a warning.

    Returns:
        A dict of name to vector.

    """
    values = {
        name: eval_function(getattr(params, name), grid)
        for name in FUNCTION_NAMES
    }
    if np.any(values["d"] <= 0):
        raise InvalidParameterError(
            "The death rate d must be positive on the whole grid."
        )
    for name in ("r", "mu", "psi", "nu"):
        if np.any(values[name] < 0):
            msg = "Function {} must be nonnegative on the grid."
            raise InvalidParameterError(msg.format(name))
        if np.any(values[name] == 0):
            logger.warning(
                "Function %s vanishes at some node; positivity is assumed "
                "by the asymptotic results.",
                name,
            )
    return values


class KernelMatrices(namedtuple("KernelMatrices", ["Psi", "Omega"])):
    """
    Kernels sampled on the grid, rows indexed by x and columns by y.

    * Psi (:class:`numpy.ndarray`):
        ``Psi[i, j] = Psi_lambda(x_i, y_j)``.
    * Omega (:class:`numpy.ndarray`):
        ``Omega[i, j] = omega(x_i, y_j)``.

    """


def psi_kernel(params, x, y, psi_y):
    """Psi_lambda on the outer product of phenotypes ``x`` and ``y``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    distance = np.abs(x[:, np.newaxis] - np.asarray(y)[np.newaxis, :])
    localised = np.exp(-distance / params.v) / params.v
    weight = (1.0 - params.lambda_mix) + params.lambda_mix * localised
    return weight * np.asarray(psi_y)[np.newaxis, :]


def omega_kernel(params, x, y):
    """omega on the outer product of phenotypes ``x`` and ``y``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if params.omega_kernel == "constant":
        return np.full((x.size, y.size), float(params.alpha))
    distance = np.abs(x[:, np.newaxis] - y[np.newaxis, :])
    return (params.alpha / params.s) * np.exp(-distance / params.s)


def build_kernels(params, grid, psi_values=None):
    """
    Sample Psi_lambda and omega on the grid.

    Args:

    * params
        The :class:`ModelParams`.
    * grid
        The :class:`~immunoedit.phenogrid.PhenotypeGrid` shared by x and y.

    Kwargs:

    * psi_values
        psi already evaluated on the grid, if available.

    Returns:
        A :class:`KernelMatrices`.

    """
    if params.v <= 0 or params.s <= 0:
        msg = "Kernel widths must be positive, got v={} and s={}."
        raise InvalidParameterError(msg.format(params.v, params.s))
    if psi_values is None:
        psi_values = eval_function(params.psi, grid)
    Psi = psi_kernel(params, grid.nodes, grid.nodes, psi_values)
    Omega = omega_kernel(params, grid.nodes, grid.nodes)
    Psi.flags.writeable = False
    Omega.flags.writeable = False
    return KernelMatrices(Psi=Psi, Omega=Omega)


def _check_operator(matrix, vector, grid):
    vector = np.asarray(vector, dtype=float)
    expected = (grid.n_points, grid.n_points)
    if matrix.shape != expected or vector.shape != (grid.n_points,):
        msg = "Kernel of shape {} and vector of shape {} do not fit grid {}."
        raise DimensionError(
            msg.format(matrix.shape, vector.shape, grid.n_points)
        )
    return vector


def compute_phi(Psi, ell, grid):
    """Predation integral phi(x) = int Psi(x, y) ell(y) dy."""
    ell = _check_operator(Psi, ell, grid)
    return Psi @ (grid.weights * ell)


def compute_chi(Omega, n, grid):
    """Stimulation integral chi(y) = int omega(x, y) n(x) dx."""
    n = _check_operator(Omega, n, grid)
    return Omega.T @ (grid.weights * n)


class DiscreteModel(
    namedtuple(
        "DiscreteModel",
        ["params", "grid", "r", "d", "mu", "psi", "nu", "kernels"],
    )
):
    """
    A :class:`ModelParams` evaluated once on a grid.

    Holds the rate-function vectors and the :class:`KernelMatrices`,
    shared read-only by every time step of a run.

    """

    def nu_effective(self, t):
        """nu(y) / (1 + h ICI(t)), the tumour-induced exhaustion rate."""
        dose = ici_dose(self.params.ici, t)
        return self.nu / (1.0 + self.params.h * dose)

    def nu_limit(self):
        dose = self.params.ici.limit_dose()
        return self.nu / (1.0 + self.params.h * dose)


def discretise(params, grid):
    """Evaluate ``params`` on ``grid`` into a :class:`DiscreteModel`."""
    values = evaluate_functions(params, grid)
    kernels = build_kernels(params, grid, psi_values=values["psi"])
    return DiscreteModel(params=params, grid=grid, kernels=kernels, **values)
