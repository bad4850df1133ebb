# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
Scenario configuration: a JSON schema mapped onto dataclasses, and the
catalogue of named presets.

A configuration file is a JSON object whose keys are the fields of
:class:`ScenarioConfig`. Omitted keys take their defaults, unknown keys are
rejected. Model functions are lists of polynomial coefficients in ascending
degree, or ``{"tabulated": [...]}``.

"""
import copy
from dataclasses import dataclass, field, fields, replace
import json
import logging
import math

import numpy as np

from immunoedit.analysis import ClassifierThresholds
from immunoedit.exceptions import ConfigError, ImmunoeditError
from immunoedit.ide_solver import Explicit, GaussianProfile, Uniform
from immunoedit.model import (
    FUNCTION_NAMES,
    IciSchedule,
    ModelParams,
    params_field_names,
)
from immunoedit.ode_reduced import METHODS, OdeParams
from immunoedit.phenogrid import PolynomialCoeffs, Tabulated

logger = logging.getLogger(__name__)

#: Scalar parameters a sweep axis may vary; "ici" is a constant dose.
SWEEPABLE = ("k1", "k2", "alpha", "h", "lambda_mix", "v", "s", "ici")
_STRICTLY_POSITIVE = ("k2", "v", "s")

_INITIAL_KINDS = {
    "gaussian": GaussianProfile,
    "uniform": Uniform,
    "explicit": Explicit,
}


@dataclass(frozen=True)
class OdeSetup:
    """A run of the reduced three-mass system."""

    params: OdeParams = field(
        default_factory=lambda: OdeParams(
            r=1.3, d=0.25, mu=1.0, nu=0.4, omega=1.0, k1=0.4, k2=0.8514
        )
    )
    init: tuple = (1.5, 0.5, 3.0)
    T: float = 500.0
    dt: float = 0.01
    method: str = "rk4"
    record_every: int = 10
    window_fraction: float = 0.4

    def __post_init__(self):
        object.__setattr__(self, "init", tuple(float(u) for u in self.init))
        if len(self.init) != 3 or min(self.init) < 0:
            raise ConfigError(
                "The initial state must be three nonnegative masses.",
                field="ode.init",
            )
        if self.method not in METHODS:
            msg = "Unknown method {!r}, expected one of {}."
            raise ConfigError(
                msg.format(self.method, METHODS), field="ode.method"
            )
        _check_times(self.T, self.dt, "ode")


@dataclass(frozen=True)
class SweepAxis:
    name: str
    values: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "values", tuple(float(v) for v in self.values)
        )
        where = "sweep.axes.{}".format(self.name)
        if self.name not in SWEEPABLE:
            msg = "Cannot sweep over {!r}, expected one of {}."
            raise ConfigError(msg.format(self.name, SWEEPABLE), field=where)
        if not self.values:
            raise ConfigError("A sweep axis needs values.", field=where)
        for value in self.values:
            if not math.isfinite(value) or value < 0:
                msg = "Sweep values must be finite and nonnegative, got {}."
                raise ConfigError(msg.format(value), field=where)
            if self.name in _STRICTLY_POSITIVE and value <= 0:
                msg = "Sweep values of {} must be positive, got {}."
                raise ConfigError(msg.format(self.name, value), field=where)


@dataclass(frozen=True)
class SweepSpec:
    """
    One or two parameter axes, swept on their cartesian product.

    Every cell is simulated up to ``T`` with step ``dt``, falling back to
    ``fallback_dt`` when the coarse step is unstable. ``jobs`` workers run
    the cells.

    """

    axes: tuple = ()
    T: float = 500.0
    dt: float = 1.0
    fallback_dt: float = 0.1
    jobs: int = 1

    def __post_init__(self):
        axes = tuple(
            axis if isinstance(axis, SweepAxis) else SweepAxis(**axis)
            for axis in self.axes
        )
        object.__setattr__(self, "axes", axes)
        if not 1 <= len(axes) <= 2:
            msg = "A sweep has one or two axes, got {}."
            raise ConfigError(msg.format(len(axes)), field="sweep.axes")
        if len({axis.name for axis in axes}) != len(axes):
            raise ConfigError(
                "Sweep axes must vary distinct parameters.",
                field="sweep.axes",
            )
        _check_times(self.T, self.dt, "sweep")
        if not self.fallback_dt > 0:
            raise ConfigError(
                "The fallback step must be positive.",
                field="sweep.fallback_dt",
            )
        if int(self.jobs) != self.jobs or self.jobs == 0:
            raise ConfigError(
                "jobs must be a nonzero integer.", field="sweep.jobs"
            )

    def cells(self):
        """Parameter values of every cell, in row-major cell order."""
        grids = np.meshgrid(
            *[axis.values for axis in self.axes], indexing="ij"
        )
        return [
            tuple(float(g.flat[index]) for g in grids)
            for index in range(grids[0].size)
        ]


@dataclass(frozen=True)
class ScenarioConfig:
    """
    Everything needed to run and analyse one scenario.

    * name: label written into the outputs.
    * params: the :class:`~immunoedit.model.ModelParams`.
    * grid: number of phenotype nodes.
    * T, dt, fallback_dt: final time, time step and the finer step used
      when the coarse one is unstable.
    * initial: initial data kind of :mod:`immunoedit.ide_solver`.
    * snapshot_times: times of the density snapshots.
    * tumour_alone: simulate without immune cells.
    * thresholds: :class:`~immunoedit.analysis.ClassifierThresholds`.
    * ode: an :class:`OdeSetup` for the ``ode`` command.
    * sweep: a :class:`SweepSpec` for the ``sweep`` command.
    * delta: tilt of the model functions for the ``periodic`` command.
    * out: output directory.

    """

    name: str = "default"
    params: ModelParams = field(default_factory=ModelParams)
    grid: int = 1000
    T: float = 1000.0
    dt: float = 0.1
    fallback_dt: float = 0.1
    initial: object = field(default_factory=GaussianProfile)
    snapshot_times: tuple = (0.0, 100.0, 250.0, 500.0, 1000.0)
    tumour_alone: bool = False
    thresholds: ClassifierThresholds = field(
        default_factory=ClassifierThresholds
    )
    ode: OdeSetup = field(default_factory=OdeSetup)
    sweep: SweepSpec = None
    delta: float = 0.0
    out: str = "output"

    def __post_init__(self):
        times = tuple(float(t) for t in self.snapshot_times)
        object.__setattr__(self, "snapshot_times", times)
        if int(self.grid) != self.grid or self.grid < 3:
            msg = "The grid needs at least 3 points, got {!r}."
            raise ConfigError(msg.format(self.grid), field="grid")
        _check_times(self.T, self.dt, "")
        if not self.fallback_dt > 0:
            raise ConfigError(
                "The fallback step must be positive.", field="fallback_dt"
            )
        if not 0 <= self.delta < 0.1:
            msg = "The tilt delta must lie in [0, 0.1), got {}."
            raise ConfigError(msg.format(self.delta), field="delta")


def _check_times(T, dt, section):
    prefix = section + "." if section else ""
    if not (T > 0 and dt > 0 and dt <= T):
        msg = "Need T > 0 and 0 < dt <= T, got T={} and dt={}."
        raise ConfigError(msg.format(T, dt), field=prefix + "dt")


def _check_keys(data, allowed, where):
    if not isinstance(data, dict):
        msg = "Expected an object for {}, got {!r}."
        raise ConfigError(msg.format(where or "the config", data), field=where)
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        name = "{}.{}".format(where, unknown[0]) if where else unknown[0]
        msg = "Unknown configuration key {!r}."
        raise ConfigError(msg.format(name), field=name)


def _function_from_json(value, where):
    if isinstance(value, dict):
        _check_keys(value, ("tabulated",), where)
        return Tabulated(value["tabulated"])
    if isinstance(value, (int, float)):
        return PolynomialCoeffs([value])
    return PolynomialCoeffs(value)


def _ici_from_json(value):
    if isinstance(value, (int, float)):
        return IciSchedule.constant(value)
    _check_keys(value, [f.name for f in fields(IciSchedule)], "params.ici")
    return IciSchedule(**value)


def params_from_dict(data):
    """Build :class:`~immunoedit.model.ModelParams` from its JSON form."""
    _check_keys(data, params_field_names(), "params")
    kwargs = {}
    for name, value in data.items():
        where = "params." + name
        try:
            if name in FUNCTION_NAMES:
                kwargs[name] = _function_from_json(value, where)
            elif name == "ici":
                kwargs[name] = _ici_from_json(value)
            else:
                kwargs[name] = value
        except ConfigError:
            raise
        except (ImmunoeditError, TypeError, ValueError) as err:
            raise ConfigError(str(err), field=where) from err
    try:
        return ModelParams(**kwargs)
    except ImmunoeditError as err:
        raise ConfigError(str(err), field=_guess_field(err, "params")) from err


def params_to_dict(params):
    result = {}
    for name in params_field_names():
        value = getattr(params, name)
        result[name] = value.to_json() if hasattr(value, "to_json") else value
    return result


def _guess_field(err, section):
    # Parameter errors name the offending parameter first.
    words = str(err).replace("=", " ").split()
    for word in words:
        if word in params_field_names():
            return "{}.{}".format(section, word)
    return section


def _initial_from_json(data):
    data = dict(data)
    kind = data.pop("kind", "gaussian")
    if kind not in _INITIAL_KINDS:
        msg = "Unknown initial data kind {!r}, expected one of {}."
        raise ConfigError(
            msg.format(kind, tuple(_INITIAL_KINDS)), field="initial.kind"
        )
    cls = _INITIAL_KINDS[kind]
    _check_keys(data, cls._fields, "initial")
    if cls is Explicit:
        missing = [name for name in cls._fields if name not in data]
        if missing:
            msg = "Explicit initial data needs {}."
            raise ConfigError(msg.format(missing), field="initial")
        return Explicit(
            *(tuple(float(v) for v in data[name]) for name in cls._fields)
        )
    if cls is Uniform:
        values = {name: data.get(name, 0.0) for name in cls._fields}
        return Uniform(**{k: float(v) for k, v in values.items()})
    return GaussianProfile(**data)


def _initial_to_json(initial):
    kind = {cls: name for name, cls in _INITIAL_KINDS.items()}[type(initial)]
    result = {"kind": kind}
    for name, value in initial._asdict().items():
        result[name] = list(value) if isinstance(value, tuple) else value
    return result


def _ode_from_json(data):
    _check_keys(data, [f.name for f in fields(OdeSetup)], "ode")
    data = dict(data)
    if "params" in data:
        _check_keys(
            data["params"], [f.name for f in fields(OdeParams)], "ode.params"
        )
        try:
            data["params"] = OdeParams(
                **{**OdeSetup().params.to_json(), **data["params"]}
            )
        except ImmunoeditError as err:
            raise ConfigError(str(err), field="ode.params") from err
    return OdeSetup(**data)


def _ode_to_json(ode):
    return {
        "params": ode.params.to_json(),
        "init": list(ode.init),
        "T": ode.T,
        "dt": ode.dt,
        "method": ode.method,
        "record_every": ode.record_every,
        "window_fraction": ode.window_fraction,
    }


def _sweep_from_json(data):
    if data is None:
        return None
    _check_keys(data, [f.name for f in fields(SweepSpec)], "sweep")
    data = dict(data)
    axes = []
    for axis in data.pop("axes", ()):
        _check_keys(axis, ("name", "values"), "sweep.axes")
        axes.append(SweepAxis(**axis))
    return SweepSpec(axes=tuple(axes), **data)


def _sweep_to_json(sweep):
    if sweep is None:
        return None
    return {
        "axes": [
            {"name": axis.name, "values": list(axis.values)}
            for axis in sweep.axes
        ],
        "T": sweep.T,
        "dt": sweep.dt,
        "fallback_dt": sweep.fallback_dt,
        "jobs": sweep.jobs,
    }


def config_from_dict(data):
    """
    Build a :class:`ScenarioConfig` from its JSON form.

    Raises:
        :class:`~immunoedit.exceptions.ConfigError` naming the offending
        field.

    """
    _check_keys(data, [f.name for f in fields(ScenarioConfig)], "")
    kwargs = dict(data)
    if "params" in kwargs:
        kwargs["params"] = params_from_dict(kwargs["params"])
    if "initial" in kwargs:
        kwargs["initial"] = _initial_from_json(kwargs["initial"])
    if "thresholds" in kwargs:
        _check_keys(
            kwargs["thresholds"],
            [f.name for f in fields(ClassifierThresholds)],
            "thresholds",
        )
        try:
            kwargs["thresholds"] = ClassifierThresholds(
                **kwargs["thresholds"]
            )
        except ImmunoeditError as err:
            raise ConfigError(str(err), field="thresholds") from err
    if "ode" in kwargs:
        kwargs["ode"] = _ode_from_json(kwargs["ode"])
    if "sweep" in kwargs:
        kwargs["sweep"] = _sweep_from_json(kwargs["sweep"])
    try:
        return ScenarioConfig(**kwargs)
    except ConfigError:
        raise
    except (ImmunoeditError, TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err


def config_to_dict(config):
    """The JSON form of a :class:`ScenarioConfig`."""
    return {
        "name": config.name,
        "params": params_to_dict(config.params),
        "grid": config.grid,
        "T": config.T,
        "dt": config.dt,
        "fallback_dt": config.fallback_dt,
        "initial": _initial_to_json(config.initial),
        "snapshot_times": list(config.snapshot_times),
        "tumour_alone": config.tumour_alone,
        "thresholds": config.thresholds.to_json(),
        "ode": _ode_to_json(config.ode),
        "sweep": _sweep_to_json(config.sweep),
        "delta": config.delta,
        "out": config.out,
    }


def _merge(base, overlay):
    merged = copy.deepcopy(base)
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


_THREE_ES = {"lambda_mix": 0.5, "s": 1.0}
_ICI_PARAMS = {
    "nu": [1.0, -0.1],
    "k1": 0.01,
    "lambda_mix": 1.0,
    "s": 1.0,
    "v": 2.0,
}
_CONSTANT_FUNCTIONS = {
    "r": [1.3],
    "d": [0.25],
    "mu": [1.0],
    "psi": [1.0],
    "nu": [0.4],
    "k1": 0.4,
    "k2": 0.7314,
    "alpha": 1.0,
    "lambda_mix": 0.0,
    "omega_kernel": "constant",
}
_HEATMAP_VALUES = [float(v) for v in np.linspace(0.1, 1.0, 7)]

#: Named scenarios, as partial JSON configurations.
PRESETS = {
    "tumour-alone": {"name": "tumour-alone", "tumour_alone": True},
    "innate": {"name": "innate", "params": {"lambda_mix": 0.0, "s": 1.0}},
    "eradication": {
        "name": "eradication",
        "params": dict(_THREE_ES, v=0.1),
    },
    "equilibrium": {
        "name": "equilibrium",
        "params": dict(_THREE_ES, v=0.5),
    },
    "escape": {"name": "escape", "params": dict(_THREE_ES, v=1.0)},
    "ici-escalation": {
        "name": "ici-escalation",
        "params": _ICI_PARAMS,
        "sweep": {
            "axes": [{"name": "ici", "values": [0.0, 1.0, 10.0]}],
            "T": 1000.0,
            "dt": 0.1,
        },
    },
    "ici-0": {"name": "ici-0", "params": dict(_ICI_PARAMS, ici=0.0)},
    "ici-1": {"name": "ici-1", "params": dict(_ICI_PARAMS, ici=1.0)},
    "ici-10": {"name": "ici-10", "params": dict(_ICI_PARAMS, ici=10.0)},
    "heatmap": {
        "name": "heatmap",
        "params": {"lambda_mix": 0.5},
        "T": 500.0,
        "sweep": {
            "axes": [
                {"name": "s", "values": _HEATMAP_VALUES},
                {"name": "v", "values": _HEATMAP_VALUES},
            ],
            "T": 500.0,
            "dt": 1.0,
            "fallback_dt": 0.1,
        },
    },
    "ode-stable": {
        "name": "ode-stable",
        "ode": {"params": {"k2": 0.8514}, "init": [1.5, 0.5, 3.0], "T": 500},
    },
    "ode-periodic": {
        "name": "ode-periodic",
        "ode": {
            "params": {"k2": 0.7314},
            "init": [0.5304, 1.1699, 0.7115],
            "T": 5000.0,
        },
    },
    "periodic-ide": {
        "name": "periodic-ide",
        "params": _CONSTANT_FUNCTIONS,
        "initial": {
            "kind": "uniform",
            "n": 0.5304,
            "ell": 1.1699,
            "p": 0.7115,
        },
        "T": 5000.0,
        "snapshot_times": [0.0, 1000.0, 2500.0, 5000.0],
        "delta": 0.01,
    },
}


def preset_names():
    return sorted(PRESETS)


def load_config(path=None, preset=None):
    """
    Read a scenario configuration.

    Kwargs:

    * path
        A JSON file. When omitted only the preset and defaults are used.
    * preset
        Name of an entry of :data:`PRESETS`, which the file overrides.

    Returns:
        A validated :class:`ScenarioConfig`.

    Raises:
        :class:`~immunoedit.exceptions.ConfigError` for unreadable JSON
        (with its line and column) or invalid values (with the field).

    """
    data = {}
    if preset is not None:
        if preset not in PRESETS:
            msg = "Unknown preset {!r}, expected one of {}."
            raise ConfigError(
                msg.format(preset, preset_names()), field="preset"
            )
        data = copy.deepcopy(PRESETS[preset])
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as err:
            msg = "Cannot read configuration {}: {}."
            raise ConfigError(msg.format(path, err.strerror)) from err
        try:
            from_file = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as err:
            msg = "Invalid JSON in {} at line {}, column {}: {}."
            raise ConfigError(
                msg.format(path, err.lineno, err.colno, err.msg)
            ) from err
        data = _merge(data, from_file)
    config = config_from_dict(data)
    logger.info("Loaded scenario %r.", config.name)
    return config


def apply_overrides(
    config, grid=None, dt=None, T=None, out=None, jobs=None, ici=None
):
    """Replace the values given on the command line."""
    changes = {}
    if grid is not None:
        changes["grid"] = grid
    if dt is not None:
        changes["dt"] = dt
    if T is not None:
        changes["T"] = T
    if out is not None:
        changes["out"] = out
    if ici is not None:
        changes["params"] = config.params.with_changes(
            ici=IciSchedule.constant(ici)
        )
    if jobs is not None and config.sweep is not None:
        changes["sweep"] = replace(config.sweep, jobs=jobs)
    return replace(config, **changes)
