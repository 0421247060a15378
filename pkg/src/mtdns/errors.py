"""Exception hierarchy shared by every simulator module."""


class MtdnsError(Exception):
    """Base class for simulator errors."""


# engine
class SchedulingInPast(MtdnsError):
    pass


# data plane
class DuplicateRule(MtdnsError):
    pass


class InvalidRule(MtdnsError):
    pass


class DuplicateGroup(MtdnsError):
    pass


class EmptyBuckets(MtdnsError):
    pass


class InvalidWeight(MtdnsError):
    pass


class GroupInUse(MtdnsError):
    pass


class UnknownGroup(MtdnsError):
    pass


class UnknownTarget(MtdnsError):
    pass


class NoMatch(MtdnsError):
    pass


# DNS servers
class AlreadyRunning(MtdnsError):
    pass


class AlreadyOff(MtdnsError):
    pass


class SlaveUnreachable(MtdnsError):
    pass


class ReadOnlyZone(MtdnsError):
    pass


# controller
class CounterRegression(MtdnsError):
    pass


class InvalidThreshold(MtdnsError):
    pass


class BackupNotReady(MtdnsError):
    pass


class AlreadyMitigating(MtdnsError):
    pass


class NotMitigating(MtdnsError):
    pass


# VNF manager
class AlreadyRequested(MtdnsError):
    pass


class AlreadyDown(MtdnsError):
    pass


# metrics
class NoQueries(MtdnsError):
    pass


class NoCompletions(MtdnsError):
    pass


class IoFailure(MtdnsError):
    pass


# scenarios / cli
class ParseError(MtdnsError):
    def __init__(self, message, line=None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ValidationError(MtdnsError):
    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class IncompatibleScenarios(MtdnsError):
    pass
