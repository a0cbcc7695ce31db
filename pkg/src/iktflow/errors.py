"""Exception hierarchy.

Every failure path in the package raises one of these so that callers (and the
command line driver) can map it to an exit code and name the violated contract.
"""


class IKTError(Exception):
    """Base class for all package errors."""

    #: short name of the violated contract, reported by the CLI
    contract = "contract"


class ConfigurationError(IKTError, ValueError):
    """Invalid parameters, unknown case ids, malformed configuration."""

    contract = "configuration"


class ContractError(IKTError, ValueError):
    """A precondition of an operation is not met (missing data, bad centering)."""

    contract = "operation contract"


class PositivityError(IKTError, ValueError):
    """Kinetic pressure (or thermal velocity) would be non-positive."""

    contract = "kinetic pressure positivity"


class InvariantViolation(IKTError, RuntimeError):
    """A runtime invariant failed (Jacobian, divergence, non-finite fields)."""

    contract = "invariant"

    def __init__(self, message, contract=None):
        super().__init__(message)
        if contract is not None:
            self.contract = contract


class GrazingEventError(InvariantViolation):
    """A trajectory reached a wall with vanishing relative velocity."""

    contract = "grazing wall event"
