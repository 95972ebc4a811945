"""Exception hierarchy shared by every v2isim module."""


class V2ISimError(Exception):
    """Base class for all errors raised by this package."""


# scenario parsing / network model
class ScenarioError(V2ISimError, ValueError):
    pass


class ScenarioSyntaxError(ScenarioError):
    """The scenario document is not well-formed or misses required keys."""


class DanglingReference(ScenarioError):
    pass


class InvalidValue(ScenarioError):
    pass


class CapacityMismatch(ScenarioError):
    """A declared occupancy or pool capacity disagrees with the formula."""


class OffsetOutOfRange(V2ISimError, ValueError):
    pass


# signals
class UnknownApproach(V2ISimError, KeyError):
    pass


class IncompleteColorMap(V2ISimError, ValueError):
    pass


class ConflictingGreens(V2ISimError, ValueError):
    pass


class NotInOverride(V2ISimError, RuntimeError):
    pass


# microsim
class NoParallelLane(V2ISimError, ValueError):
    pass


class InvariantViolation(V2ISimError, AssertionError):
    """A simulation invariant (ordering, speed bound, bookkeeping) broke."""


# agent fabric / controllers
class UnknownSender(V2ISimError, KeyError):
    pass


class DuplicateRegistration(V2ISimError, ValueError):
    pass


class MissionUnknown(V2ISimError, KeyError):
    pass


class MissionConflict(V2ISimError, RuntimeError):
    """A second emergency mission was declared while one is still active."""


# metrics / reporting
class EmptyTrajectory(V2ISimError, ValueError):
    pass


class NegativeDuration(V2ISimError, ValueError):
    pass


class ZeroAcceleration(V2ISimError, ZeroDivisionError):
    pass


class ZeroBaseline(V2ISimError, ZeroDivisionError):
    pass


class ConfigMismatch(V2ISimError, ValueError):
    pass


class CorruptTrace(V2ISimError, ValueError):
    pass
