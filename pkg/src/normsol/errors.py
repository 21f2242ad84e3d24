"""Exception and warning types raised by the solvers."""


class NormsolError(Exception):
    """Base class for solver failures."""


class DilationOutOfRange(NormsolError, ValueError):
    pass


class NotInCone(NormsolError):
    """The quartic form is not positive, so the fiber map has no critical point."""


class ZeroField(NormsolError, ValueError):
    pass


class ExponentOutOfRange(NormsolError, ValueError):
    pass


class BracketFailure(NormsolError):
    pass


class MaxIterations(NormsolError):
    pass


class NonConvergence(NormsolError):
    pass


class NodeTargetUnreachable(NormsolError):
    pass


class SupportOverlap(NormsolError):
    pass


class EnergyBudgetExceeded(NormsolError):
    def __init__(self, message, achieved=None, budget=None):
        super().__init__(message)
        self.achieved = achieved
        self.budget = budget


class StagnationError(NormsolError):
    pass


class SingularJacobian(NormsolError):
    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class Diverged(NormsolError):
    pass


class ContinuationStalled(NormsolError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class TailUnderflow(NormsolError):
    pass


class LiouvilleSuspect(NormsolError):
    """A multiplier came out nonnegative; the solution is a degenerate limit."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class TruncationWarning(UserWarning):
    """The field does not decay to the noise floor before ``r_max``."""
