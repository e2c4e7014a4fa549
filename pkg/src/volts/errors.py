"""Exception and warning types raised across the pipeline."""


class VoltsError(Exception):
    """Base class for every error raised by volts."""


# market data
class MalformedRow(VoltsError):
    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class InvariantViolation(VoltsError):
    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class EmptySeries(VoltsError):
    pass


class NoCommonDates(VoltsError):
    pass


class EmptyWindow(VoltsError):
    pass


# estimators and generic length checks
class WindowTooShort(VoltsError):
    pass


class SeriesTooShort(VoltsError):
    pass


# anomaly
class AllFlagged(VoltsError):
    pass


# clustering
class InfeasibleBand(VoltsError):
    pass


class TooFewSeries(VoltsError):
    pass


class NotThreeClusters(VoltsError):
    pass


# causality
class SingularDesign(VoltsError):
    def __init__(self, message, condition_number=float("inf")):
        self.condition_number = condition_number
        super().__init__(f"{message} (condition number {condition_number:.3g})")


class DegenerateVariance(VoltsError):
    pass


class NoSignificantEdges(VoltsError):
    pass


# backtest
class BudgetExhausted(VoltsError):
    pass


class SignalOutOfCalendar(VoltsError):
    pass


class ZeroVariance(VoltsError):
    pass


class NoDownside(VoltsError):
    pass


class ZeroDrawdown(VoltsError):
    pass


# configuration / orchestration
class ConfigError(VoltsError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class StageError(VoltsError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")


# warnings (non-fatal statuses)
class VoltsWarning(UserWarning):
    pass


class DegenerateScores(VoltsWarning):
    """Score vector has zero spread; nothing can be flagged."""


class EmptyClusterRepaired(VoltsWarning):
    """A cluster emptied during k-medoids iteration and was reseeded."""
