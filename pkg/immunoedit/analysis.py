# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
Post-processing of simulations: outcome labels, concentration of the
tumour density and comparison with the predicted long-time limits.

"""
from collections import namedtuple
from dataclasses import asdict, dataclass, field
import logging
import math

import numpy as np
from scipy.integrate import cumulative_trapezoid

from immunoedit.exceptions import (
    InsufficientDataError,
    InvalidParameterError,
    ZeroMassError,
)
from immunoedit.ode_reduced import detect_limit_cycle
from immunoedit.phenogrid import Regridder, argmax_node, quad

logger = logging.getLogger(__name__)

ERADICATION = "Eradication"
EQUILIBRIUM = "Equilibrium"
ESCAPE = "Escape"
OSCILLATORY = "Oscillatory"
UNDETERMINED = "Undetermined"

LABELS = (ERADICATION, EQUILIBRIUM, ESCAPE, OSCILLATORY, UNDETERMINED)


@dataclass(frozen=True)
class ClassifierThresholds:
    """
    Constants of the outcome decision rule.

    * eradication: tail mean of rho below which the tumour is eradicated.
    * escape_fraction: tail mean above this fraction of the carrying
      capacity is an escape.
    * tail_fraction: trailing fraction of the series examined.
    * drift_tolerance: largest relative change of rho over the tail for a
      run to count as settled.
    * cycle_min_samples: tails shorter than this skip the oscillation test.

    """

    eradication: float = 1e-3
    escape_fraction: float = 0.9
    tail_fraction: float = 0.2
    drift_tolerance: float = 1e-2
    cycle_min_samples: int = 100

    def __post_init__(self):
        if not 0 < self.tail_fraction <= 1:
            msg = "The tail fraction must lie in (0, 1], got {}."
            raise InvalidParameterError(msg.format(self.tail_fraction))
        if self.eradication < 0 or self.drift_tolerance < 0:
            raise InvalidParameterError(
                "Classifier thresholds must be nonnegative."
            )
        if not 0 < self.escape_fraction <= 1:
            msg = "The escape fraction must lie in (0, 1], got {}."
            raise InvalidParameterError(msg.format(self.escape_fraction))

    def to_json(self):
        return asdict(self)


@dataclass
class Outcome:
    """Label of a run with the measurements behind it."""

    label: str
    rho_final: float
    rho_ratio: float
    evidence: dict = field(default_factory=dict)

    def to_json(self):
        return asdict(self)


class ConcentrationReport(
    namedtuple(
        "ConcentrationReport",
        ["total_mass", "peak_location", "mass_within_0_05", "spread"],
    )
):
    """
    * total_mass: integral of the density.
    * peak_location: node of the largest value, the smallest on ties.
    * mass_within_0_05: fraction of the mass within 0.05 of the peak.
    * spread: interquartile width of the normalised density.

    """

    def to_json(self):
        return {name: float(value) for name, value in self._asdict().items()}


class PredictionComparison(
    namedtuple(
        "PredictionComparison",
        [
            "available",
            "reason",
            "rho_final",
            "rho_inf",
            "rho_error",
            "rho_pass",
            "peak_location",
            "x_inf",
            "x_error",
            "x_pass",
        ],
    )
):
    """Agreement of a run with a predicted limit (rho_inf, x_inf)."""

    def to_json(self):
        return dict(self._asdict())


def classify_series(times, rho, rho_star, thresholds=None):
    """
    Label a tumour-mass series as Eradication, Equilibrium, Escape,
    Oscillatory or Undetermined.

    The trailing ``tail_fraction`` of the series is examined, in order:
    a sustained oscillation, a mean below the eradication threshold, a
    mean above the escape fraction of ``rho_star``. A settled series that
    is none of these is an equilibrium, and a drifting one is undetermined.

    Returns:
        An :class:`Outcome`.

    """
    if thresholds is None:
        thresholds = ClassifierThresholds()
    times = np.asarray(times, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if rho.size == 0:
        raise InsufficientDataError("Cannot classify an empty series.")
    if rho_star <= 0:
        msg = "The carrying capacity must be positive, got {}."
        raise InvalidParameterError(msg.format(rho_star))

    start = rho.size - int(math.ceil(thresholds.tail_fraction * rho.size))
    tail = rho[start:]
    tail_mean = float(np.mean(tail))
    drift = abs(float(tail[-1] - tail[0])) / max(tail_mean, 1e-300)
    evidence = {
        "tail_samples": int(tail.size),
        "tail_mean": tail_mean,
        "drift": drift,
        "rho_star": float(rho_star),
        "thresholds": thresholds.to_json(),
    }

    label = None
    if tail.size >= thresholds.cycle_min_samples:
        cycle = detect_limit_cycle(
            tail,
            times[start:],
            window_fraction=1.0,
            min_samples=thresholds.cycle_min_samples,
        )
        evidence["cycle"] = cycle.to_json()
        if cycle.oscillatory:
            label = OSCILLATORY
    if label is None:
        if tail_mean < thresholds.eradication:
            label = ERADICATION
        elif tail_mean > thresholds.escape_fraction * rho_star:
            label = ESCAPE
        elif drift > thresholds.drift_tolerance:
            label = UNDETERMINED
        else:
            label = EQUILIBRIUM

    rho_final = float(rho[-1])
    return Outcome(
        label=label,
        rho_final=rho_final,
        rho_ratio=rho_final / rho_star,
        evidence=evidence,
    )


def classify_outcome(output, rho_star, thresholds=None):
    """
    Label a :class:`~immunoedit.ide_solver.SimOutput`; see
    :func:`classify_series`.

    """
    return classify_series(output.times, output.rho, rho_star, thresholds)


def concentration_metrics(n, grid):
    """
    Measure how concentrated a tumour density is.

    Args:

    * n
        Density at the grid nodes.
    * grid
        The :class:`~immunoedit.phenogrid.PhenotypeGrid`.

    Returns:
        A :class:`ConcentrationReport`.

    """
    total = quad(n, grid)
    if not total > 0:
        msg = "Density has mass {}; nothing to measure."
        raise ZeroMassError(msg.format(total))
    n = np.asarray(n, dtype=float)
    nodes = grid.nodes
    peak = float(nodes[argmax_node(n)])
    cdf = cumulative_trapezoid(n, nodes, initial=0.0)
    cdf = cdf / cdf[-1]
    lower, upper = np.interp([peak - 0.05, peak + 0.05], nodes, cdf)
    q1, q3 = np.interp([0.25, 0.75], cdf, nodes)
    return ConcentrationReport(
        total_mass=total,
        peak_location=peak,
        mass_within_0_05=float(np.clip(upper - lower, 0.0, 1.0)),
        spread=float(q3 - q1),
    )


def compare_to_prediction(
    output,
    fp,
    grid=None,
    rho_tolerance=0.05,
    node_tolerance=2,
    eradication=ClassifierThresholds.eradication,
):
    """
    Compare the end of a run with a predicted limit.

    Args:

    * output
        The :class:`~immunoedit.ide_solver.SimOutput`.
    * fp
        A result carrying ``rho_inf``, ``x_inf`` and ``converged``, such as
        a :class:`~immunoedit.asymptotics.FixedPointResult`.

    Kwargs:

    * grid
        The grid of the run, taken from ``output`` when omitted.
    * rho_tolerance
        Largest relative error on the mass.
    * node_tolerance
        Largest error on the peak location, in grid spacings.
    * eradication
        Final masses below this are not compared.

    Returns:
        A :class:`PredictionComparison`; ``available`` is False when the
        prediction did not converge or the tumour was eradicated.

    """
    grid = grid if grid is not None else output.grid
    rho_final = float(output.rho[-1])
    unavailable = dict(
        rho_final=rho_final,
        rho_inf=math.nan,
        rho_error=math.nan,
        rho_pass=False,
        peak_location=math.nan,
        x_inf=math.nan,
        x_error=math.nan,
        x_pass=False,
    )
    if not fp.converged:
        return PredictionComparison(
            available=False,
            reason="prediction did not converge",
            **unavailable,
        )
    if rho_final < eradication or fp.rho_inf <= 0:
        return PredictionComparison(
            available=False, reason="tumour eradicated", **unavailable
        )
    report = concentration_metrics(output.final_state.n, grid)
    rho_error = abs(rho_final - fp.rho_inf) / fp.rho_inf
    x_error = abs(report.peak_location - fp.x_inf)
    return PredictionComparison(
        available=True,
        reason="",
        rho_final=rho_final,
        rho_inf=float(fp.rho_inf),
        rho_error=rho_error,
        rho_pass=bool(rho_error <= rho_tolerance),
        peak_location=report.peak_location,
        x_inf=float(fp.x_inf),
        x_error=x_error,
        x_pass=bool(x_error <= node_tolerance * grid.spacing + 1e-12),
    )


def grid_refinement_error(n_coarse, grid_coarse, n_fine, grid_fine):
    """Relative L1 distance between two densities, on the finer grid."""
    transferred = Regridder(grid_coarse, grid_fine).regrid(n_coarse)
    n_fine = np.asarray(n_fine, dtype=float)
    reference = quad(np.abs(n_fine), grid_fine)
    if reference == 0:
        raise ZeroMassError("The fine density has zero mass.")
    return quad(np.abs(transferred - n_fine), grid_fine) / reference
