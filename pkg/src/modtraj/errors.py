"""Exception hierarchy shared by all modules.

``DataError`` covers anything wrong with the inputs, ``ConfigError`` covers
bad parameters. The command-line front end maps them to exit codes 3 and 2.
"""


class ModTrajError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ModTrajError, ValueError):
    pass


class DataError(ModTrajError, ValueError):
    pass


class MalformedRecord(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownAction(MalformedRecord):
    pass


class NonPositiveDuration(MalformedRecord):
    pass


class DuplicateId(DataError):
    pass


class IndefiniteSpan(DataError):
    pass


class CutoffBeforeFirstActivity(DataError):
    pass


class NoAuthoredComments(DataError):
    pass


class ZeroExpectedCount(DataError):
    pass


class DegenerateTable(ZeroExpectedCount):
    """A row or column of a contingency table sums to zero."""


class EmptySample(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class EmptyDataset(DataError):
    pass


class MissingFeature(DataError):
    pass


class DegenerateInput(DataError):
    pass


class GridEmpty(ConfigError):
    pass


class TooFewRows(DataError):
    pass


class InvalidConfig(ConfigError):
    pass
