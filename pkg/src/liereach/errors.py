"""Exception hierarchy shared by all liereach modules."""


class LieReachError(Exception):
    """Base class for all errors raised by liereach."""


class GroupMismatch(LieReachError, ValueError):
    pass


class NotInGroup(LieReachError, ValueError):
    pass


class OutsideChart(LieReachError, ValueError):
    pass


class UnknownSeminorm(LieReachError, KeyError):
    pass


class BadExponent(LieReachError, ValueError):
    pass


class BadInterval(LieReachError, ValueError):
    pass


class IndexOutOfRange(LieReachError, IndexError):
    pass


class InvalidControl(LieReachError, ValueError):
    pass


class BadStepCount(LieReachError, ValueError):
    pass


class GridMismatch(LieReachError, ValueError):
    pass


class ManifoldMismatch(LieReachError, ValueError):
    pass


class TimeOutOfRange(LieReachError, ValueError):
    pass


class NotInHull(LieReachError, ValueError):
    pass


class BudgetInfeasible(LieReachError):
    """The sample grid is too coarse to certify the requested L1 budget."""


class BudgetExceeded(LieReachError):
    """Trotter doubling hit ``n_max`` before reaching the requested distance."""

    def __init__(self, message, best_distance=float("inf"), best_n=None):
        super().__init__(message)
        self.best_distance = best_distance
        self.best_n = best_n


class CapacityExceeded(LieReachError):
    """Reachability exploration hit the point limit; ``cloud`` holds the partial result."""

    def __init__(self, message, cloud=None):
        super().__init__(message)
        self.cloud = cloud
