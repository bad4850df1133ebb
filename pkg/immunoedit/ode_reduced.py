# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
The three-dimensional system followed by the total masses when every model
function is constant in its phenotype:

    drho/dt   = (r - d rho - mu sigma) rho
    dsigma/dt = gamma - (k1 + nu rho) sigma
    dgamma/dt = gamma (omega rho - k2 gamma)

with rho, sigma and gamma the masses of tumour, effector and naive cells.

"""
from collections import namedtuple
from dataclasses import asdict, dataclass
import logging
import math

import numpy as np
import scipy.signal

from immunoedit.exceptions import (
    InstabilityError,
    InsufficientDataError,
    InvalidParameterError,
)
from immunoedit.model import discretise, omega_kernel, psi_kernel
from immunoedit.phenogrid import quad

logger = logging.getLogger(__name__)

METHODS = ("euler", "rk4")

#: Negative values above this are rounding and silently clamped.
UNDERSHOOT_TOL = 1e-9


@dataclass(frozen=True)
class OdeParams:
    """Constant rates of the reduced system."""

    r: float
    d: float
    mu: float
    nu: float
    omega: float
    k1: float
    k2: float

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value):
                msg = "Parameter {} must be finite, got {!r}."
                raise InvalidParameterError(msg.format(name, value))
        if self.d <= 0:
            msg = "Parameter d = {!r} must be > 0."
            raise InvalidParameterError(msg.format(self.d))
        if self.k2 <= 0:
            msg = "Parameter k2 = {!r} must be > 0."
            raise InvalidParameterError(msg.format(self.k2))

    def to_json(self):
        return asdict(self)


class OdeState(namedtuple("OdeState", ["rho", "sigma", "gamma"])):
    """Masses of tumour, effector and naive cells."""


class OdeTrajectory(namedtuple("OdeTrajectory", ["times", "states"])):
    """
    * times: vector of recorded times.
    * states: array of shape (len(times), 3), columns rho, sigma, gamma.

    """

    @property
    def rho(self):
        return self.states[:, 0]

    @property
    def sigma(self):
        return self.states[:, 1]

    @property
    def gamma(self):
        return self.states[:, 2]

    @property
    def final_state(self):
        return OdeState(*(float(value) for value in self.states[-1]))


class CycleReport(
    namedtuple(
        "CycleReport",
        ["oscillatory", "amplitude", "period", "decay_ratio", "n_peaks"],
    )
):
    """
    * oscillatory: whether a sustained oscillation was found.
    * amplitude: max - min over the window.
    * period: mean spacing of successive maxima, NaN with fewer than two.
    * decay_ratio: amplitude over the second half of the window divided by
      the amplitude over the first half.
    * n_peaks: number of maxima found in the window.

    """

    def to_json(self):
        return {
            "oscillatory": bool(self.oscillatory),
            "amplitude": float(self.amplitude),
            "period": None if math.isnan(self.period) else self.period,
            "decay_ratio": float(self.decay_ratio),
            "n_peaks": int(self.n_peaks),
        }


def ode_rhs(state, params):
    """
    Right-hand side of the reduced system at ``state``.

    >>> params = OdeParams(1.3, 0.25, 1.0, 0.4, 1.0, 0.4, 0.7314)
    >>> ode_rhs(OdeState(0.0, 0.0, 0.0), params)
    (0.0, 0.0, 0.0)

    """
    rho, sigma, gamma = state
    p = params
    return (
        (p.r - p.d * rho - p.mu * sigma) * rho,
        gamma - (p.k1 + p.nu * rho) * sigma,
        gamma * (p.omega * rho - p.k2 * gamma),
    )


def _euler(state, params, dt):
    d_rho, d_sigma, d_gamma = ode_rhs(state, params)
    rho, sigma, gamma = state
    return (rho + dt * d_rho, sigma + dt * d_sigma, gamma + dt * d_gamma)


def _rk4(state, params, dt):
    half = 0.5 * dt
    k1 = ode_rhs(state, params)
    k2 = ode_rhs(tuple(u + half * k for u, k in zip(state, k1)), params)
    k3 = ode_rhs(tuple(u + half * k for u, k in zip(state, k2)), params)
    k4 = ode_rhs(tuple(u + dt * k for u, k in zip(state, k3)), params)
    return tuple(
        u + dt / 6.0 * (a + 2.0 * b + 2.0 * c + e)
        for u, a, b, c, e in zip(state, k1, k2, k3, k4)
    )


_STEPPERS = {"euler": _euler, "rk4": _rk4}


def ode_run(params, init, T, dt, method="rk4", record_every=1):
    """
    Integrate the reduced system with a fixed step.

    Args:

    * params
        The :class:`OdeParams`.
    * init
        The initial :class:`OdeState` (or any triple), nonnegative.
    * T, dt
        Final time and time step, both positive.

    Kwargs:

    * method
        "rk4" (default) or "euler". Euler stepping matches the integrator
        of the full phenotype-structured system.
    * record_every
        Keep one step in ``record_every``; the final state is always kept.

    Returns:
        An :class:`OdeTrajectory`.

    Negative values produced by a step are set to zero; a WARNING is
    logged if any was below -1e-9.

    """
    if method not in METHODS:
        msg = "Unknown integration method {!r}, expected one of {}."
        raise InvalidParameterError(msg.format(method, METHODS))
    if not (T > 0 and dt > 0):
        msg = "Need T > 0 and dt > 0, got T={} and dt={}."
        raise InvalidParameterError(msg.format(T, dt))
    state = tuple(float(u) for u in init)
    if len(state) != 3 or min(state) < 0:
        msg = "The initial state must be three nonnegative masses, got {}."
        raise InvalidParameterError(msg.format(init))
    advance = _STEPPERS[method]
    n_steps = int(round(T / dt))
    record_every = max(int(record_every), 1)
    kept = list(range(0, n_steps + 1, record_every))
    if kept[-1] != n_steps:
        kept.append(n_steps)

    times = np.array(kept, dtype=float) * dt
    states = np.empty((len(kept), 3))
    states[0] = state
    slot = 1
    worst = 0.0
    for index in range(1, n_steps + 1):
        state = advance(state, params, dt)
        if not all(math.isfinite(u) for u in state):
            t = index * dt
            name = ("rho", "sigma", "gamma")[
                [math.isfinite(u) for u in state].index(False)
            ]
            msg = "Non-finite {} in the reduced system at t={:g}."
            raise InstabilityError(msg.format(name, t), field=name, time=t)
        if min(state) < 0:
            worst = min(worst, min(state))
            state = tuple(max(u, 0.0) for u in state)
        if slot < len(kept) and index == kept[slot]:
            states[slot] = state
            slot += 1
    if worst < -UNDERSHOOT_TOL:
        logger.warning(
            "Reduced system undershot to %g; negative masses were clamped.",
            worst,
        )
    return OdeTrajectory(times=times, states=states)


def interior_equilibrium(params):
    """
    The equilibrium with all three masses positive, if any.

    rho is the positive root of

        nu d rho^2 + (mu omega / k2 + k1 d - nu r) rho - k1 r = 0,

    then gamma = omega rho / k2 and sigma = gamma / (k1 + nu rho).

    Returns:
        An :class:`OdeState`, or None when no positive root exists.

    >>> params = OdeParams(1.3, 0.25, 1.0, 0.4, 1.0, 0.4, 0.7314)
    >>> [round(value, 4) for value in interior_equilibrium(params)]
    [0.5204, 1.1699, 0.7115]

    """
    p = params
    a = p.nu * p.d
    b = p.mu * p.omega / p.k2 + p.k1 * p.d - p.nu * p.r
    c = -p.k1 * p.r
    if a == 0:
        roots = [-c / b] if b != 0 else []
    else:
        roots = [
            root.real
            for root in np.roots([a, b, c])
            if abs(root.imag) < 1e-12
        ]
    positive = [root for root in roots if root > 0]
    if not positive:
        return None
    rho = float(max(positive))
    gamma = p.omega * rho / p.k2
    sigma = gamma / (p.k1 + p.nu * rho)
    if sigma <= 0 or gamma <= 0:
        return None
    return OdeState(rho, sigma, gamma)


def reduce_params(params, x_star, grid):
    """
    Constant rates of the reduced system seen by a tumour concentrated at
    ``x_star``.

    r and d are taken at ``x_star``, mu is scaled by int Psi(x_star, y) dy,
    nu is int nu(y) dy at the limiting ICI dose and omega is
    int omega(x_star, y) dy.

    Returns:
        An :class:`OdeParams`.

    """
    if not 0 <= x_star <= 1:
        msg = "The concentration phenotype must lie in [0, 1], got {}."
        raise InvalidParameterError(msg.format(x_star))
    model = discretise(params, grid)
    nodes = grid.nodes
    psi_row = psi_kernel(params, x_star, nodes, model.psi)[0]
    omega_row = omega_kernel(params, x_star, nodes)[0]
    return OdeParams(
        r=params.r.at(x_star),
        d=params.d.at(x_star),
        mu=params.mu.at(x_star) * quad(psi_row, grid),
        nu=quad(model.nu_limit(), grid),
        omega=quad(omega_row, grid),
        k1=params.k1,
        k2=params.k2,
    )


def detect_limit_cycle(
    values,
    times=None,
    window_fraction=0.4,
    amplitude_fraction=0.05,
    spacing_tolerance=0.2,
    min_peaks=3,
    min_decay_ratio=0.5,
    min_samples=100,
):
    """
    Look for a sustained oscillation in the trailing part of a series.

    Args:

    * values
        The series, typically the tumour mass.

    Kwargs:

    * times
        Sample times; sample indices are used when omitted.
    * window_fraction
        Trailing fraction of the series examined.
    * amplitude_fraction
        Smallest amplitude, relative to the window mean, that counts.
    * spacing_tolerance
        Largest relative deviation of a peak spacing from the mean spacing.
    * min_peaks
        Smallest number of maxima in the window.
    * min_decay_ratio
        Smallest ratio of late to early amplitude; rules out damped
        oscillations.
    * min_samples
        Smallest window length accepted.

    Returns:
        A :class:`CycleReport`.

    """
    values = np.asarray(values, dtype=float)
    if times is None:
        times = np.arange(values.size, dtype=float)
    times = np.asarray(times, dtype=float)
    if times.shape != values.shape:
        msg = "Got {} times for {} values."
        raise InvalidParameterError(msg.format(times.size, values.size))
    if not 0 < window_fraction <= 1:
        msg = "The window fraction must lie in (0, 1], got {}."
        raise InvalidParameterError(msg.format(window_fraction))
    start = values.size - int(math.ceil(window_fraction * values.size))
    window = values[start:]
    window_times = times[start:]
    if window.size < min_samples:
        msg = "Need at least {} samples in the window, got {}."
        raise InsufficientDataError(msg.format(min_samples, window.size))

    amplitude = float(np.max(window) - np.min(window))
    mean = float(np.mean(window))
    half = window.size // 2
    early = float(np.ptp(window[:half]))
    late = float(np.ptp(window[half:]))
    if early > 0:
        decay_ratio = late / early
    else:
        decay_ratio = 1.0 if late == 0 else math.inf

    peaks = np.array([], dtype=int)
    if amplitude > 0:
        peaks, _ = scipy.signal.find_peaks(
            window, prominence=0.1 * amplitude
        )
    spacing = np.diff(window_times[peaks])
    period = float(np.mean(spacing)) if spacing.size else math.nan
    regular = bool(
        spacing.size
        and np.all(np.abs(spacing - period) <= spacing_tolerance * period)
    )
    oscillatory = (
        amplitude > amplitude_fraction * abs(mean)
        and peaks.size >= min_peaks
        and regular
        and decay_ratio >= min_decay_ratio
    )
    return CycleReport(
        oscillatory=bool(oscillatory),
        amplitude=amplitude,
        period=period,
        decay_ratio=float(decay_ratio),
        n_peaks=int(peaks.size),
    )
