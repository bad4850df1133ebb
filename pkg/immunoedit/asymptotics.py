# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
Long-time behaviour of the tumour-immune system.

Carrying capacity of the tumour alone, a-priori bounds on the three
populations, the non-extinction condition, and damped multistart
fixed-point solvers for the limit systems reached when the tumour density
concentrates as a Dirac mass rho_inf delta(x - x_inf):

innate response (lambda = 0), over (rho, phi)::

    rho = max_x (r - mu phi) / d
    phi = rho / k2 int psi(y) omega(x(rho, phi), y) / (nu(y) rho + k1) dy

adaptive or mixed response, over (rho, ell(.))::

    rho    = max_x (r - mu int Psi(., y) ell(y) dy) / d
    ell(y) = rho / k2 omega(x(rho, ell), y) / (nu(y) rho + k1)

with x(.) the maximiser of the fitness r - d rho - mu phi. A constant ICI
dose is absorbed in nu as nu / (1 + h ICI).

On a grid the best phenotype can fall between nodes, or a second phenotype
can invade the first, so that no single node is a fixed point. The
adaptive solver then looks for masses m_k >= 0 on the nodes with

    rho  = sum_k m_k,
    ell  = sum_k m_k omega(x_k, .) / (k2 (nu rho + k1)),

the fitness zero wherever m_k > 0 and non-positive elsewhere.

"""
from collections import namedtuple
from dataclasses import dataclass, field
import itertools
import logging

import numpy as np
from scipy.optimize import fsolve

from immunoedit.exceptions import InvalidParameterError
from immunoedit.model import compute_phi, discretise, omega_kernel
from immunoedit.phenogrid import argmax_node, quad

logger = logging.getLogger(__name__)

#: Nodes within this distance of max(r/d) form the concentration set.
TOL_A = 1e-9
#: Smallest fitness gap between the best and second best node for the
#: maximiser to count as unique.
TOL_GAP = 1e-8

DAMPING = 0.5
STEP_TOL = 1e-10
MAX_ITERATIONS = 100000

#: Fractions of the a-priori bounds used for the default starts.
RHO_START_FRACTIONS = (0.25, 0.5, 0.75, 1.0)
PHI_START_FRACTIONS = (0.25, 1.0)
ADAPTIVE_START_FRACTIONS = tuple(np.arange(1, 9) / 8)

#: Largest fitness allowed off the support of a multi-node equilibrium.
TOL_INVASION = 1e-10
#: Largest fitness error accepted on the support.
TOL_SUPPORT = 1e-10
#: Mass given to a node when it joins the support.
SEED_MASS = 1e-6


class CarryingCapacity(
    namedtuple("CarryingCapacity", ["rho_star", "x_star", "A", "index"])
):
    """
    * rho_star: max over the nodes of r / d.
    * x_star: smallest node of the concentration set.
    * A: nodes within ``TOL_A`` of the maximum.
    * index: grid index of ``x_star``.

    """


class Bounds(
    namedtuple(
        "Bounds",
        [
            "rho_bar",
            "p_bar",
            "ell_bar",
            "phi_bar",
            "phi_bar_x",
            "omega_max",
        ],
    )
):
    """
    Upper bounds reached by every solution after a transient.

    * rho_bar: the carrying capacity.
    * p_bar, ell_bar: vectors over y, ``p_bar = omega_max rho_bar / k2``
      and ``ell_bar = p_bar / k1``.
    * phi_bar: ``int psi ell_bar``, the bound of the innate predation.
    * phi_bar_x: ``int Psi(x, y) ell_bar(y) dy``, the bound of the
      predation at each x (equal to ``phi_bar`` when lambda = 0).
    * omega_max: ``max_x omega(x, y)`` over the grid.

    """


@dataclass
class FixedPointResult:
    """
    Outcome of a multistart fixed-point solve.

    ``rho_inf``, ``phi_inf``, ``x_inf`` and the limit profiles describe the
    first converged start. ``solutions`` lists every distinct converged
    solution as ``(rho, phi, x)`` in start order. ``converged`` is False
    when no start converged to a point inside the a-priori bounds, in which
    case the values describe the last iterate of the first start.

    ``support`` lists ``(x, mass)`` for every node carrying tumour mass in
    the limit. It has a single entry unless the equilibrium had to be
    resolved over several nodes, in which case ``x_inf`` is the node of
    largest mass.

    """

    kind: str
    rho_inf: float
    phi_inf: float
    x_inf: float
    x_index: int
    ell_inf: np.ndarray
    p_inf: np.ndarray
    phi_inf_x: np.ndarray
    residuals: dict
    unique_argmax: bool
    max_fitness: float
    multistart_spread: float
    converged: bool
    solutions: list = field(default_factory=list)
    n_iterations: int = 0
    support: list = field(default_factory=list)

    def to_json(self):
        return {
            "kind": self.kind,
            "converged": self.converged,
            "rho_inf": self.rho_inf,
            "phi_inf": self.phi_inf,
            "x_inf": self.x_inf,
            "residuals": dict(self.residuals),
            "unique_argmax": self.unique_argmax,
            "max_fitness": self.max_fitness,
            "multistart_spread": self.multistart_spread,
            "n_iterations": self.n_iterations,
            "solutions": [
                {"rho_inf": rho, "phi_inf": phi, "x_inf": x}
                for rho, phi, x in self.solutions
            ],
            "support": [
                {"x": x, "mass": mass} for x, mass in self.support
            ],
        }


def carrying_capacity(params, grid):
    """
    The carrying capacity max(r / d) and where it is reached.

    Args:

    * params
        The :class:`~immunoedit.model.ModelParams`.
    * grid
        The :class:`~immunoedit.phenogrid.PhenotypeGrid`.

    Returns:
        A :class:`CarryingCapacity`.

    """
    model = discretise(params, grid)
    ratio = model.r / model.d
    rho_star = float(np.max(ratio))
    in_A = np.flatnonzero(ratio >= rho_star - TOL_A)
    index = int(in_A[0])
    return CarryingCapacity(
        rho_star=rho_star,
        x_star=float(grid.nodes[index]),
        A=grid.nodes[in_A],
        index=index,
    )


def _bounds(model):
    params = model.params
    grid = model.grid
    if params.k1 <= 0:
        msg = (
            "The bound on effector cells is p_bar / k1, which is unbounded "
            "for k1 = {}."
        )
        raise InvalidParameterError(msg.format(params.k1))
    rho_bar = float(np.max(model.r / model.d))
    omega_max = model.kernels.Omega.max(axis=0)
    p_bar = omega_max * rho_bar / params.k2
    ell_bar = p_bar / params.k1
    return Bounds(
        rho_bar=rho_bar,
        p_bar=p_bar,
        ell_bar=ell_bar,
        phi_bar=quad(model.psi * ell_bar, grid),
        phi_bar_x=compute_phi(model.kernels.Psi, ell_bar, grid),
        omega_max=omega_max,
    )


def apriori_bounds(params, grid):
    """
    Bounds on the tumour mass and the immune densities.

    Requires k1 > 0, otherwise effector cells have no natural death and no
    bound exists.

    Returns:
        A :class:`Bounds`.

    """
    return _bounds(discretise(params, grid))


def non_extinction_check(params, grid):
    """
    Evaluate the non-extinction condition min_x (r - mu phi_bar(x)) > 0.

    With lambda = 0 this is the innate condition with a constant
    phi_bar; otherwise the x-dependent bound of the predation is used.

    Returns:
        ``(holds, margin)``.

    """
    model = discretise(params, grid)
    bounds = _bounds(model)
    margin = float(np.min(model.r - model.mu * bounds.phi_bar_x))
    return margin > 0, margin


def limit_profiles(params, grid, rho_inf, x_inf):
    """
    Limits of the naive and effector densities once the tumour density
    has concentrated as rho_inf delta(x - x_inf).

    ``p_inf(y) = rho_inf omega(x_inf, y) / k2`` and
    ``ell_inf(y) = p_inf(y) / (nu(y) rho_inf + k1)``, with nu at the
    limiting ICI dose.

    Returns:
        ``(p_inf, ell_inf)``, vectors over y.

    """
    model = discretise(params, grid)
    return _limit_profiles(model, rho_inf, x_inf)


def _limit_profiles(model, rho, x):
    params = model.params
    omega_row = omega_kernel(params, x, model.grid.nodes)[0]
    p_inf = rho * omega_row / params.k2
    ell_inf = p_inf / (model.nu_limit() * rho + params.k1)
    return p_inf, ell_inf


def _fitness(model, rho, phi):
    return model.r - model.d * rho - model.mu * phi


def _rho_map(model, phi):
    return max(float(np.max((model.r - model.mu * phi) / model.d)), 0.0)


def _unique_argmax(fitness):
    if fitness.size < 2:
        return True
    top_two = np.partition(fitness, -2)[-2:]
    return bool(top_two[1] - top_two[0] >= TOL_GAP)


def _damped_iteration(mapping, start, theta, tol, max_iterations):
    # Iterates u <- (1 - theta) u + theta mapping(u) from ``start``.
    u = np.array(start, dtype=float)
    for iteration in range(1, max_iterations + 1):
        new = (1.0 - theta) * u + theta * mapping(u)
        change = float(np.max(np.abs(new - u)))
        u = new
        if not np.isfinite(change):
            return u, False, iteration
        if change < tol:
            return u, True, iteration
        if iteration % 10000 == 0:
            logger.debug("Iteration %d, step %g.", iteration, change)
    return u, False, max_iterations


def _measure_state(model, masses):
    # Tumour concentrated as sum_k masses[k] delta(x - x_k).
    params = model.params
    rho = float(np.sum(masses))
    p = masses @ model.kernels.Omega / params.k2
    ell = p / (model.nu_limit() * rho + params.k1)
    phi_x = compute_phi(model.kernels.Psi, ell, model.grid)
    return rho, ell, phi_x


def _measure_fitness(model, masses):
    rho, _, phi_x = _measure_state(model, masses)
    return _fitness(model, rho, phi_x)


def _resolve_support(model, index, max_rounds=None):
    """
    Masses over the nodes at which the fitness is zero on the support and
    at most ``TOL_INVASION`` elsewhere.

    Starts from a Dirac mass at ``index``. Each round solves the fitness
    equations on the current support, then drops the node of most negative
    mass or adds the strongest invader. An invader that cannot coexist
    with the residents, its mass coming out negative, replaces them.

    Returns:
        The vector of masses, or None when the rounds run out or a solve
        fails.

    """
    n_points = model.grid.n_points
    if max_rounds is None:
        max_rounds = 2 * n_points
    masses = np.zeros(n_points)
    masses[index] = 0.5 * float(np.max(model.r / model.d))
    support = [int(index)]
    invader = None

    def support_fitness(values, nodes):
        trial = np.zeros(n_points)
        trial[nodes] = values
        return _measure_fitness(model, trial)[nodes]

    def solve(nodes):
        current = masses[nodes]
        guesses = (current, np.full(current.size, abs(current.sum()) / 2))
        for guess in guesses:
            values = fsolve(
                support_fitness, guess, args=(nodes,), xtol=1e-12
            )
            error = np.max(np.abs(support_fitness(values, nodes)))
            if error < TOL_SUPPORT:
                return values
        logger.debug("Support %s could not be solved.", nodes)
        return None

    for _ in range(max_rounds):
        values = solve(support)
        # The invader is last in the support.
        if invader is not None and (values is None or values[-1] < 0):
            kept = masses[support] if values is None else values
            total = float(np.sum(np.clip(kept, 0.0, None)))
            masses[:] = 0.0
            masses[invader] = max(total, SEED_MASS)
            support = [invader]
            invader = None
            continue
        invader = None
        if values is None:
            return None
        masses[support] = values
        lowest = int(np.argmin(values))
        if values[lowest] < 0:
            masses[support[lowest]] = 0.0
            del support[lowest]
            if not support:
                return None
            continue
        outside = np.setdiff1d(np.arange(n_points), support)
        if outside.size == 0:
            return masses
        fitness = _measure_fitness(model, masses)
        candidate = int(outside[np.argmax(fitness[outside])])
        if fitness[candidate] <= TOL_INVASION:
            return masses
        masses[candidate] = SEED_MASS
        support.append(candidate)
        invader = candidate
    logger.debug("Support rounds exhausted at %s.", support)
    return None


def _mixture_profiles(model, support):
    # Limits of p and ell for a tumour spread over ``support``.
    params = model.params
    nodes = model.grid.nodes
    rho = sum(mass for _, mass in support)
    p_inf = (
        sum(mass * omega_kernel(params, x, nodes)[0] for x, mass in support)
        / params.k2
    )
    ell_inf = p_inf / (model.nu_limit() * rho + params.k1)
    return p_inf, ell_inf


def _support_solution(model, masses):
    rho, ell, phi_x = _measure_state(model, masses)
    fitness = _fitness(model, rho, phi_x)
    nodes = np.flatnonzero(masses > 0)
    support = [(float(model.grid.nodes[k]), float(masses[k])) for k in nodes]
    residuals = {
        "rho": abs(rho - _rho_map(model, phi_x)),
        # The ell equation holds when every support node is a maximiser.
        "ell": float(np.max(fitness) - np.min(fitness[nodes])),
    }
    return rho, ell, int(np.argmax(masses)), support, residuals


def _spread(points):
    spread = 0.0
    for a, b in itertools.combinations(points, 2):
        spread = max(spread, float(np.max(np.abs(a - b))))
    return spread


def _distinct(solutions, atol=1e-6):
    kept = []
    for solution in solutions:
        if not any(
            abs(solution[0] - other[0]) <= atol
            and abs(solution[1] - other[1]) <= atol
            and solution[2] == other[2]
            for other in kept
        ):
            kept.append(solution)
    return kept


def _default_innate_starts(bounds):
    return [
        (a * bounds.rho_bar, b * bounds.phi_bar)
        for a in RHO_START_FRACTIONS
        for b in PHI_START_FRACTIONS
    ]


def solve_fixed_point_innate(
    params,
    grid,
    starts=None,
    theta=DAMPING,
    tol=STEP_TOL,
    max_iterations=MAX_ITERATIONS,
):
    """
    Solve the innate limit system over (rho, phi) by damped iteration.

    Args:

    * params
        The :class:`~immunoedit.model.ModelParams`, with lambda = 0.
    * grid
        The :class:`~immunoedit.phenogrid.PhenotypeGrid`.

    Kwargs:

    * starts
        Sequence of ``(rho, phi)`` starting points. Defaults to 8 points
        spanning the a-priori rectangle (0, rho_bar] x (0, phi_bar].
    * theta
        Damping factor of the iteration.
    * tol
        Convergence threshold on the size of an iteration step.
    * max_iterations
        Iteration cap per start.

    Returns:
        A :class:`FixedPointResult`. Non-convergence is reported through
        ``converged``, not raised.

    """
    if params.lambda_mix != 0:
        msg = "The innate limit system needs lambda = 0, got {}."
        raise InvalidParameterError(msg.format(params.lambda_mix))
    model = discretise(params, grid)
    bounds = _bounds(model)
    if starts is None:
        starts = _default_innate_starts(bounds)
    if len(starts) == 0:
        raise InvalidParameterError("At least one start is required.")

    nu = model.nu_limit()
    k1, k2 = params.k1, params.k2
    Omega = model.kernels.Omega

    def phi_map(rho, index):
        # Row ``index`` of Omega is omega(x_index, y) over y.
        integrand = model.psi * Omega[index] / (nu * rho + k1)
        return rho / k2 * quad(integrand, grid)

    def mapping(u):
        rho, phi = u
        index = argmax_node(_fitness(model, rho, phi))
        rho_new = _rho_map(model, phi)
        return np.array([rho_new, phi_map(rho, index)])

    finals = []
    accepted = []
    total_iterations = 0
    for number, start in enumerate(starts):
        u, converged, n_iter = _damped_iteration(
            mapping, start, theta, tol, max_iterations
        )
        total_iterations += n_iter
        rho, phi = u
        index = argmax_node(_fitness(model, rho, phi))
        residuals = {
            "rho": abs(rho - _rho_map(model, phi)),
            "phi": abs(phi - phi_map(rho, index)),
        }
        # Close the second equation exactly at the last iterate.
        phi = phi_map(rho, index)
        inside = (
            -tol <= rho <= bounds.rho_bar * (1 + 1e-9) + tol
            and -tol <= phi <= bounds.phi_bar * (1 + 1e-9) + tol
        )
        if converged and not inside:
            logger.info(
                "Start %d converged outside the a-priori bounds, rejected.",
                number,
            )
        finals.append((rho, phi, index, residuals))
        if converged and inside:
            accepted.append((rho, phi, index, residuals))

    converged = bool(accepted)
    if not converged:
        logger.warning(
            "No start of the innate fixed-point iteration converged."
        )
    rho, phi, index, residuals = accepted[0] if converged else finals[0]
    fitness = _fitness(model, rho, phi)
    x_inf = float(grid.nodes[index])
    p_inf, ell_inf = _limit_profiles(model, rho, x_inf)
    solutions = _distinct(
        [(rho_, phi_, float(grid.nodes[i])) for rho_, phi_, i, _ in accepted]
    )
    result = FixedPointResult(
        kind="innate",
        rho_inf=float(rho),
        phi_inf=float(phi),
        x_inf=x_inf,
        x_index=int(index),
        ell_inf=ell_inf,
        p_inf=p_inf,
        phi_inf_x=np.full(grid.n_points, float(phi)),
        residuals=residuals,
        unique_argmax=_unique_argmax(fitness),
        max_fitness=float(np.max(fitness)),
        multistart_spread=_spread(
            [np.array([a, b]) for a, b, _, _ in accepted]
        ),
        converged=converged,
        solutions=solutions,
        n_iterations=total_iterations,
        support=[(x_inf, float(rho))],
    )
    logger.info(
        "Innate fixed point: rho=%.6g, phi=%.6g, x=%.4g (%d solution(s)).",
        result.rho_inf,
        result.phi_inf,
        result.x_inf,
        len(solutions),
    )
    return result


def solve_fixed_point_adaptive(
    params,
    grid,
    starts=None,
    theta=DAMPING,
    tol=STEP_TOL,
    max_iterations=MAX_ITERATIONS,
    resolve_support=True,
):
    """
    Solve the adaptive (or mixed) limit system over (rho, ell).

    ``starts`` is a sequence of rho values; each start takes its initial
    ell from the second equation at the carrying-capacity phenotype.
    Defaults to 8 fractions of the carrying capacity. The remaining
    arguments and the result are as for :func:`solve_fixed_point_innate`;
    ``phi_inf`` is then ``int psi ell_inf``.

    When no start converges, typically because the iterates jump between
    maximisers, the tumour mass is spread over the nodes instead (see the
    module notes). Starting from the last maximiser of the first start,
    the support is grown by invading nodes until no node outside it has a
    positive fitness. The result then has ``unique_argmax`` False and one
    ``support`` entry per node. Pass ``resolve_support=False`` to report
    the failed iteration instead.

    """
    model = discretise(params, grid)
    bounds = _bounds(model)
    if starts is None:
        starts = [a * bounds.rho_bar for a in ADAPTIVE_START_FRACTIONS]
    if len(starts) == 0:
        raise InvalidParameterError("At least one start is required.")

    nu = model.nu_limit()
    k1, k2 = params.k1, params.k2
    Omega = model.kernels.Omega
    Psi = model.kernels.Psi
    x_star_index = argmax_node(model.r / model.d)

    def ell_map(rho, index):
        return rho / k2 * Omega[index] / (nu * rho + k1)

    def split(u):
        return u[0], u[1:]

    def mapping(u):
        rho, ell = split(u)
        phi_x = compute_phi(Psi, ell, grid)
        index = argmax_node(_fitness(model, rho, phi_x))
        rho_new = _rho_map(model, phi_x)
        return np.concatenate([[rho_new], ell_map(rho, index)])

    finals = []
    accepted = []
    total_iterations = 0
    tolerance = 1e-9 * (1.0 + bounds.ell_bar) + tol
    for number, rho0 in enumerate(starts):
        start = np.concatenate([[rho0], ell_map(rho0, x_star_index)])
        u, converged, n_iter = _damped_iteration(
            mapping, start, theta, tol, max_iterations
        )
        total_iterations += n_iter
        rho, ell = split(u)
        phi_x = compute_phi(Psi, ell, grid)
        index = argmax_node(_fitness(model, rho, phi_x))
        residuals = {
            "rho": abs(rho - _rho_map(model, phi_x)),
            "ell": float(np.max(np.abs(ell - ell_map(rho, index)))),
        }
        # Close the second equation exactly at the last iterate.
        ell = ell_map(rho, index)
        inside = -tol <= rho <= bounds.rho_bar * (1 + 1e-9) + tol and bool(
            np.all(ell <= bounds.ell_bar + tolerance)
        )
        if converged and not inside:
            logger.info(
                "Start %d converged outside the a-priori bounds, rejected.",
                number,
            )
        support = [(float(grid.nodes[index]), float(rho))]
        finals.append((rho, ell, index, support, residuals))
        if converged and inside:
            accepted.append((rho, ell, index, support, residuals))

    if not accepted and resolve_support:
        masses = _resolve_support(model, finals[0][2])
        if masses is not None:
            accepted.append(_support_solution(model, masses))
            logger.info(
                "Equilibrium resolved over %d nodes.", len(accepted[0][3])
            )

    converged = bool(accepted)
    if not converged:
        logger.warning(
            "No start of the adaptive fixed-point iteration converged."
        )
    rho, ell, index, support, residuals = (
        accepted[0] if converged else finals[0]
    )
    phi_x = compute_phi(Psi, ell, grid)
    fitness = _fitness(model, rho, phi_x)
    x_inf = float(grid.nodes[index])
    p_inf, ell_limit = _mixture_profiles(model, support)
    residuals = dict(
        residuals, limit_profiles=float(np.max(np.abs(ell - ell_limit)))
    )
    solutions = _distinct(
        [
            (rho_, quad(model.psi * ell_, grid), float(grid.nodes[i]))
            for rho_, ell_, i, _, _ in accepted
        ]
    )
    result = FixedPointResult(
        kind="adaptive",
        rho_inf=float(rho),
        phi_inf=quad(model.psi * ell, grid),
        x_inf=x_inf,
        x_index=int(index),
        ell_inf=ell,
        p_inf=p_inf,
        phi_inf_x=phi_x,
        residuals=residuals,
        unique_argmax=_unique_argmax(fitness),
        max_fitness=float(np.max(fitness)),
        multistart_spread=_spread(
            [np.concatenate([[a], b]) for a, b, _, _, _ in accepted]
        ),
        converged=converged,
        solutions=solutions,
        n_iterations=total_iterations,
        support=support,
    )
    logger.info(
        "Adaptive fixed point: rho=%.6g, x=%.4g (%d solution(s)).",
        result.rho_inf,
        result.x_inf,
        len(solutions),
    )
    return result
