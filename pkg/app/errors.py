"""Exception hierarchy for the SimReuse toolkit.

Every error carries the process exit code the CLI reports for it:
1 for usage/configuration, 2 for data errors, 3 for internal invariants.
"""


class SimReuseError(Exception):
    exit_code = 1


class ConfigurationError(SimReuseError):
    exit_code = 1


class DataError(SimReuseError):
    exit_code = 2


class InternalInvariantError(SimReuseError):
    exit_code = 3


# Ingest
class MalformedRow(DataError):
    pass


class IrregularSampling(DataError):
    pass


class MissingTarget(DataError):
    pass


class EmptyDataset(DataError):
    pass


class UnknownColumn(DataError):
    pass


# Windowing
class WindowTooLarge(DataError):
    pass


class NoViableCandidate(DataError):
    pass


# Forecasting
class NoPriorWindow(DataError):
    pass


class HistoryTooShort(DataError):
    pass


# Similarity
class EmptyDistribution(DataError):
    pass


class NoCandidates(DataError):
    pass


# Learners
class DegenerateInput(DataError):
    pass


class ArityMismatch(DataError):
    pass


class TooFewRows(DataError):
    pass


# Strategies
class TooFewWindows(DataError):
    pass


class RegistryMiss(InternalInvariantError):
    pass


# Evaluation
class LengthMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class EmptySample(DataError):
    pass


class NegativeDuration(DataError):
    pass


class MisalignedReports(DataError):
    pass
