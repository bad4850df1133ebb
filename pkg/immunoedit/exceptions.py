# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""
Exception classes raised by immunoedit.

"""


class ImmunoeditError(Exception):
    """Base class of all immunoedit errors."""


class InvalidGridError(ImmunoeditError, ValueError):
    pass


class DimensionError(ImmunoeditError, ValueError):
    pass


class InvalidParameterError(ImmunoeditError, ValueError):
    pass


class InsufficientDataError(ImmunoeditError, ValueError):
    pass


class ZeroMassError(ImmunoeditError, ValueError):
    pass


class ConfigError(ImmunoeditError, ValueError):
    """
    A configuration could not be parsed or validated.

    The offending field (dotted path) is kept on ``.field``.

    """

    def __init__(self, msg, field=None):
        super().__init__(msg)
        self.field = field


class InstabilityError(ImmunoeditError, ArithmeticError):
    """
    Time stepping produced a non-finite or unstable value.

    ``.field`` names the density ("n", "ell", "p" or an ODE component) and
    ``.time`` the simulated time at which it happened.

    """

    def __init__(self, msg, field=None, time=None):
        super().__init__(msg)
        self.field = field
        self.time = time
