"""Exception hierarchy shared across the package.

Each class carries an ``exit_code`` used by the command line front end:
3 for inputs that are infeasible or invalid, 4 for numerical failures,
5 for file problems.
"""

from __future__ import annotations


class HostcapError(Exception):
    exit_code = 4


class GridValidationError(HostcapError, ValueError):
    """Base class for malformed grid cases."""

    exit_code = 3


class CyclicTopology(GridValidationError):
    pass


class DisconnectedBus(GridValidationError):
    pass


class NoSlack(GridValidationError):
    pass


class MultipleSlack(GridValidationError):
    pass


class BadBounds(GridValidationError):
    pass


class DuplicateId(GridValidationError):
    pass


class NotAPoc(HostcapError, ValueError):
    """An operating point referenced a bus that is not a point of connection."""

    exit_code = 3


class NoConvergence(HostcapError):
    pass


class NegativeVoltage(HostcapError):
    pass


class SampleGridTooLarge(HostcapError, ValueError):
    exit_code = 3


class DegenerateRegion(HostcapError, ValueError):
    exit_code = 3


class AxisMismatch(HostcapError, ValueError):
    exit_code = 3


class InfeasibleStart(HostcapError):
    exit_code = 3


class UnboundedRay(HostcapError):
    pass


class EmptyCorrection(HostcapError):
    pass


class GridMismatch(HostcapError, ValueError):
    exit_code = 3


class LineMissesRegion(HostcapError):
    """No regulation along the requested power factor reaches the region."""

    exit_code = 3


class ParseError(HostcapError, ValueError):
    exit_code = 3


class FormulationMismatch(HostcapError):
    """The two cost formulations disagree; indicates a numerical defect."""
