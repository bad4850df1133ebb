# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
Unit tests for the integration and equilibria of the reduced system.
"""
import numpy as np
import pytest

from immunoedit.exceptions import InvalidParameterError
from immunoedit.ode_reduced import (
    OdeParams,
    OdeState,
    detect_limit_cycle,
    interior_equilibrium,
    ode_rhs,
    ode_run,
)
from immunoedit.tests.synthetic_data_generator import (
    PERIODIC_K2,
    STABLE_K2,
    constant_ode_params,
)


@pytest.mark.parametrize(
    "k2, state, tolerance",
    [
        (PERIODIC_K2, (0.5204, 1.1699, 0.7115), 1e-3),
        (STABLE_K2, (0.6257, 1.1436, 0.746), 1e-2),
    ],
)
def test_near_equilibrium_rhs(k2, state, tolerance):
    rhs = ode_rhs(OdeState(*state), constant_ode_params(k2))
    assert max(abs(value) for value in rhs) <= tolerance


def test_interior_equilibrium_is_stationary():
    for k2 in (PERIODIC_K2, STABLE_K2):
        params = constant_ode_params(k2)
        equilibrium = interior_equilibrium(params)
        rhs = ode_rhs(equilibrium, params)
        assert np.allclose(rhs, 0.0, atol=1e-12)


def test_stable_equilibrium_values():
    equilibrium = interior_equilibrium(constant_ode_params(STABLE_K2))
    assert equilibrium.rho == pytest.approx(0.6356, abs=1e-4)
    assert equilibrium.sigma == pytest.approx(1.1411, abs=1e-4)
    assert equilibrium.gamma == pytest.approx(0.7466, abs=1e-4)


def test_no_interior_equilibrium():
    # Without tumour growth the quadratic has no positive root.
    params = OdeParams(r=0.0, d=0.25, mu=1.0, nu=0.4, omega=1, k1=0.4, k2=1)
    assert interior_equilibrium(params) is None


def test_stable_regime_settles():
    trajectory = ode_run(
        constant_ode_params(STABLE_K2), OdeState(1.5, 0.5, 3.0), 500.0, 0.01
    )
    final = np.array(trajectory.final_state)
    assert np.linalg.norm(final - [0.6257, 1.1436, 0.746]) < 0.02
    equilibrium = interior_equilibrium(constant_ode_params(STABLE_K2))
    assert np.allclose(final, equilibrium, atol=1e-3)


def test_periodic_regime_oscillates():
    trajectory = ode_run(
        constant_ode_params(PERIODIC_K2),
        OdeState(0.5304, 1.1699, 0.7115),
        5000.0,
        0.01,
        record_every=10,
    )
    report = detect_limit_cycle(trajectory.rho, trajectory.times)
    assert report.oscillatory
    assert report.amplitude == pytest.approx(0.48, abs=0.02)
    assert report.decay_ratio == pytest.approx(1.0, abs=0.05)


def test_effector_decay_without_tumour():
    trajectory = ode_run(
        constant_ode_params(), OdeState(0.0, 2.0, 0.0), 10.0, 0.01
    )
    assert np.all(trajectory.rho == 0)
    assert np.all(trajectory.gamma == 0)
    assert np.allclose(
        trajectory.sigma, 2.0 * np.exp(-0.4 * trajectory.times), rtol=1e-8
    )


def test_euler_matches_rk4_at_small_step():
    params = constant_ode_params()
    init = OdeState(1.5, 0.5, 3.0)
    euler = ode_run(params, init, 5.0, 1e-4, method="euler")
    rk4 = ode_run(params, init, 5.0, 0.01)
    assert np.allclose(euler.final_state, rk4.final_state, atol=1e-3)


def test_rk4_fourth_order():
    params = constant_ode_params(STABLE_K2)
    init = OdeState(1.5, 0.5, 3.0)
    finals = [
        np.array(ode_run(params, init, 10.0, dt).final_state)
        for dt in (0.05, 0.025, 0.0125)
    ]
    coarse = np.max(np.abs(finals[0] - finals[1]))
    fine = np.max(np.abs(finals[1] - finals[2]))
    order = np.log2(coarse / fine)
    assert 3.7 < order < 4.3


def test_record_every():
    trajectory = ode_run(
        constant_ode_params(), (1.0, 0.0, 1.0), 1.1, 0.1, record_every=5
    )
    assert np.allclose(trajectory.times, [0.0, 0.5, 1.0, 1.1])
    assert trajectory.states.shape == (4, 3)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(method="midpoint"),
        dict(T=0.0),
        dict(dt=-0.1),
        dict(init=(1.0, -1.0, 0.0)),
        dict(init=(1.0, 1.0)),
    ],
)
def test_invalid_run(kwargs):
    arguments = dict(
        params=constant_ode_params(), init=(1.0, 1.0, 1.0), T=1.0, dt=0.1
    )
    arguments.update(kwargs)
    with pytest.raises(InvalidParameterError):
        ode_run(**arguments)


def test_invalid_params():
    with pytest.raises(InvalidParameterError):
        OdeParams(r=1, d=0, mu=1, nu=1, omega=1, k1=1, k2=1)
    with pytest.raises(InvalidParameterError):
        OdeParams(r=np.nan, d=1, mu=1, nu=1, omega=1, k1=1, k2=1)
