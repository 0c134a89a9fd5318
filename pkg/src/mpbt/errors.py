"""Exception hierarchy. Each class maps to one failure mode of the toolkit."""


class MPBTError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ValidationError(MPBTError, ValueError):
    exit_code = 2


class DuplicateNodeId(ValidationError):
    pass


class SourceMissing(ValidationError):
    pass


class PreconditionViolated(ValidationError):
    pass


class SchemeNotBudgetBalanced(ValidationError):
    pass


class LimitExceeded(ValidationError):
    pass


class InfeasibleChild(MPBTError):
    """A child lies outside its parent's coverage."""

    exit_code = 3


class InvalidTree(MPBTError):
    exit_code = 3


class NotAChild(MPBTError, KeyError):
    exit_code = 3


class TreeActionError(MPBTError):
    """An action that would break the tree invariants."""

    exit_code = 3


class CycleWouldForm(TreeActionError):
    pass


class NotNeighbor(TreeActionError):
    pass


class ParentDisconnected(TreeActionError):
    pass


class EmptyActionSet(MPBTError):
    exit_code = 3


class Disconnected(MPBTError):
    """Some receiver cannot be reached from the source over feasible links."""

    exit_code = 3


class DisconnectedAtFixedPower(Disconnected):
    pass


class InfeasibleSolution(MPBTError):
    exit_code = 3


class NonConvergence(MPBTError):
    exit_code = 4


class IoError(MPBTError, OSError):
    pass
