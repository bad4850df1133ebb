# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
Time integration of the tumour / effector / naive immune system.

    dn/dt   = [r(x) - d(x) rho(t) - mu(x) phi(t, x)] n
    dell/dt = p - (nu(y) rho(t) / (1 + h ICI(t)) + k1) ell
    dp/dt   = chi(t, y) p - k2 p^2

Every equation is advanced with explicit forward Euler, all couplings taken
at the current state. Negative entries produced by a step are clamped to
zero and counted.

"""
from collections import namedtuple
from dataclasses import dataclass, field
import logging

import numpy as np

from immunoedit.exceptions import (
    DimensionError,
    InstabilityError,
    InvalidParameterError,
)
from immunoedit.model import compute_chi, compute_phi, discretise
from immunoedit.phenogrid import quad

logger = logging.getLogger(__name__)

#: Largest accepted |per-capita rate| * dt before a step is refused.
STABILITY_LIMIT = 50.0


class SimState(namedtuple("SimState", ["t", "n", "ell", "p"])):
    """
    Densities of the three populations at time ``t``.

    * n: tumour density over x.
    * ell: competent (effector) immune density over y.
    * p: naive / inactive immune density over y.

    """

    def masses(self, grid):
        """(rho, sigma, gamma): the total masses of n, ell and p."""
        return (
            quad(self.n, grid),
            quad(self.ell, grid),
            quad(self.p, grid),
        )


class GaussianProfile(
    namedtuple("GaussianProfile", ["m", "e", "target_mass"])
):
    """Gaussian tumour profile of centre m and width e, scaled to a mass;
    no effector cells and naive cells p0(y) = 1 - y^2."""

    def __new__(cls, m=0.5, e=0.1, target_mass=1.0):
        return super().__new__(cls, float(m), float(e), float(target_mass))


class Explicit(namedtuple("Explicit", ["n0", "ell0", "p0"])):
    """Initial densities given node by node."""


class Uniform(namedtuple("Uniform", ["n", "ell", "p"])):
    """Constant initial densities, with masses (n, ell, p)."""


def make_initial(kind, grid):
    """
    Build the initial :class:`SimState` at t = 0.

    Args:

    * kind
        A :class:`GaussianProfile`, :class:`Explicit` or :class:`Uniform`.
    * grid
        The :class:`~immunoedit.phenogrid.PhenotypeGrid`.

    """
    shape = (grid.n_points,)
    if isinstance(kind, GaussianProfile):
        if kind.e <= 0:
            msg = "The Gaussian width must be positive, got {}."
            raise InvalidParameterError(msg.format(kind.e))
        if kind.target_mass <= 0:
            msg = "The initial tumour mass must be positive, got {}."
            raise InvalidParameterError(msg.format(kind.target_mass))
        profile = np.exp(-((grid.nodes - kind.m) ** 2) / (2 * kind.e ** 2))
        n0 = profile * (kind.target_mass / quad(profile, grid))
        ell0 = np.zeros(shape)
        p0 = 1.0 - grid.nodes ** 2
    elif isinstance(kind, Uniform):
        n0 = np.full(shape, float(kind.n))
        ell0 = np.full(shape, float(kind.ell))
        p0 = np.full(shape, float(kind.p))
    elif isinstance(kind, Explicit):
        n0, ell0, p0 = (np.array(v, dtype=float) for v in kind)
        for name, values in zip(("n0", "ell0", "p0"), (n0, ell0, p0)):
            if values.shape != shape:
                msg = "Initial {} has shape {}, expected {}."
                raise DimensionError(msg.format(name, values.shape, shape))
    else:
        msg = "Unknown initial data {!r}."
        raise InvalidParameterError(msg.format(kind))
    state = SimState(t=0.0, n=n0, ell=ell0, p=p0)
    for name, values in zip(("n", "ell", "p"), state[1:]):
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            msg = "Initial {} must be finite and nonnegative."
            raise InvalidParameterError(msg.format(name))
    return state


@dataclass
class SimOutput:
    """
    Recorded trajectory of one simulation.

    The series hold one entry per time step, initial state included.
    ``snapshots`` holds the full :class:`SimState` at the requested times
    (nearest step).

    """

    times: np.ndarray
    rho: np.ndarray
    sigma: np.ndarray
    gamma: np.ndarray
    phi_series: np.ndarray
    ici: np.ndarray
    snapshots: list
    final_state: SimState
    dt: float
    n_clamped: int = 0
    fell_back_dt: bool = False
    grid: object = field(default=None, repr=False)


def _advance(state, model, dt, stability_limit=STABILITY_LIMIT):
    # Returns the next state, the number of clamped entries and the
    # couplings (rho, mean phi) evaluated at ``state``.
    grid = model.grid
    params = model.params
    rho = quad(state.n, grid)
    phi = compute_phi(model.kernels.Psi, state.ell, grid)
    chi = compute_chi(model.kernels.Omega, state.n, grid)

    growth = model.r - model.d * rho - model.mu * phi
    loss = model.nu_effective(state.t) * rho + params.k1
    renewal = chi - params.k2 * state.p

    for name, rate in (("n", growth), ("ell", loss), ("p", renewal)):
        worst = np.max(np.abs(rate)) * dt
        if not np.isfinite(worst):
            msg = "Non-finite rate for {} at t={:g}."
            raise InstabilityError(
                msg.format(name, state.t), field=name, time=state.t
            )
        if worst > stability_limit:
            msg = "Rate of {} times dt is {:g} at t={:g}, above {:g}."
            raise InstabilityError(
                msg.format(name, worst, state.t, stability_limit),
                field=name,
                time=state.t,
            )

    n = state.n + dt * growth * state.n
    ell = state.ell + dt * (state.p - loss * state.ell)
    p = state.p + dt * renewal * state.p

    clamped = 0
    new = {}
    for name, values in (("n", n), ("ell", ell), ("p", p)):
        if not np.all(np.isfinite(values)):
            msg = "Non-finite {} produced at t={:g}."
            raise InstabilityError(
                msg.format(name, state.t), field=name, time=state.t
            )
        negative = values < 0
        count = int(np.count_nonzero(negative))
        if count:
            values = np.where(negative, 0.0, values)
            clamped += count
        new[name] = values

    next_state = SimState(t=state.t + dt, **new)
    return next_state, clamped, rho, float(np.mean(phi))


def step(state, model, dt):
    """
    Advance ``state`` by one forward Euler step of length ``dt``.

    Args:

    * state
        The current :class:`SimState`.
    * model
        The :class:`~immunoedit.model.DiscreteModel` (parameters and
        kernel matrices on the grid).
    * dt
        Time step, positive.

    Returns:
        The :class:`SimState` at ``state.t + dt``.

    """
    if dt <= 0:
        msg = "The time step must be positive, got {}."
        raise InvalidParameterError(msg.format(dt))
    next_state, _, _, _ = _advance(state, model, dt)
    return next_state


def _check_times(T, dt):
    if not (T > 0 and dt > 0 and dt <= T):
        msg = "Need T > 0 and 0 < dt <= T, got T={} and dt={}."
        raise InvalidParameterError(msg.format(T, dt))


def _integrate(
    model, state, T, dt, snapshot_times=(), stability_limit=STABILITY_LIMIT
):
    grid = model.grid
    n_steps = int(round(T / dt))
    snapshot_steps = sorted(
        {min(int(round(t / dt)), n_steps) for t in snapshot_times}
    )
    wanted = set(snapshot_steps)

    times = np.empty(n_steps + 1)
    rho = np.empty(n_steps + 1)
    sigma = np.empty(n_steps + 1)
    gamma = np.empty(n_steps + 1)
    phi_series = np.empty(n_steps + 1)
    ici = np.empty(n_steps + 1)
    snapshots = []
    n_clamped = 0

    logger.info(
        "Integrating %d steps of dt=%g on %d nodes.",
        n_steps,
        dt,
        grid.n_points,
    )
    for index in range(n_steps):
        if index in wanted:
            snapshots.append(state)
        times[index] = state.t
        sigma[index] = quad(state.ell, grid)
        gamma[index] = quad(state.p, grid)
        ici[index] = model.params.ici.at(state.t)
        state, clamped, rho[index], phi_series[index] = _advance(
            state, model, dt, stability_limit
        )
        # Keep times on the exact step lattice.
        state = state._replace(t=(index + 1) * dt)
        n_clamped += clamped

    times[n_steps] = state.t
    rho[n_steps], sigma[n_steps], gamma[n_steps] = state.masses(grid)
    phi_series[n_steps] = np.mean(
        compute_phi(model.kernels.Psi, state.ell, grid)
    )
    ici[n_steps] = model.params.ici.at(state.t)
    if n_steps in wanted:
        snapshots.append(state)

    if n_clamped:
        logger.warning(
            "%d negative entries were clamped to zero during the run.",
            n_clamped,
        )
    return SimOutput(
        times=times,
        rho=rho,
        sigma=sigma,
        gamma=gamma,
        phi_series=phi_series,
        ici=ici,
        snapshots=snapshots,
        final_state=state,
        dt=dt,
        n_clamped=n_clamped,
        grid=grid,
    )


def run(
    params,
    init,
    grid,
    T,
    dt,
    snapshot_times=(),
    stability_limit=STABILITY_LIMIT,
):
    """
    Simulate the full system from ``init`` up to time ``T``.

    Args:

    * params
        The :class:`~immunoedit.model.ModelParams`.
    * init
        Initial data kind, see :func:`make_initial`.
    * grid
        The :class:`~immunoedit.phenogrid.PhenotypeGrid`.
    * T, dt
        Final time and time step, ``0 < dt <= T``.

    Kwargs:

    * snapshot_times
        Times at which full density snapshots are kept (nearest step).
    * stability_limit
        Largest accepted |rate| * dt.

    Returns:
        A :class:`SimOutput`.

    """
    _check_times(T, dt)
    model = discretise(params, grid)
    state = make_initial(init, grid)
    return _integrate(
        model, state, T, dt, snapshot_times, stability_limit=stability_limit
    )


def run_tumour_alone(
    params,
    init,
    grid,
    T,
    dt,
    snapshot_times=(),
    stability_limit=STABILITY_LIMIT,
):
    """
    Simulate the tumour without any immune cells (ell = p = 0).

    The tumour equation then reduces to the nonlocal logistic model
    dn/dt = [r(x) - d(x) rho(t)] n. Arguments are as for :func:`run`.

    """
    _check_times(T, dt)
    model = discretise(params, grid)
    state = make_initial(init, grid)
    state = state._replace(
        ell=np.zeros_like(state.ell), p=np.zeros_like(state.p)
    )
    return _integrate(
        model, state, T, dt, snapshot_times, stability_limit=stability_limit
    )


def run_with_fallback(
    params,
    init,
    grid,
    T,
    dt,
    fallback_dt=0.1,
    snapshot_times=(),
    tumour_alone=False,
):
    """
    Run at ``dt``, rerunning at ``fallback_dt`` if the coarse run was
    refused by the stability guard or had to clamp negative entries.

    The returned output has ``fell_back_dt`` set when the rerun was used.

    """
    runner = run_tumour_alone if tumour_alone else run
    try:
        output = runner(params, init, grid, T, dt, snapshot_times)
        if output.n_clamped == 0 or fallback_dt >= dt:
            return output
        reason = "{} clamped entries".format(output.n_clamped)
    except InstabilityError as err:
        if fallback_dt >= dt:
            raise
        reason = str(err)
    logger.info(
        "Falling back from dt=%g to dt=%g (%s).", dt, fallback_dt, reason
    )
    output = runner(params, init, grid, T, fallback_dt, snapshot_times)
    output.fell_back_dt = True
    return output
