# Copyright immunoedit contributors
#
# This file is part of immunoedit and is released under the LGPL license.
# See COPYING and COPYING.LESSER in the root of the repository for full
# licensing details.
"""Top level of the immunoedit package."""

__version__ = "0.1.dev0"
