"""Exception hierarchy shared across the package."""


class SwitchAdjustError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(SwitchAdjustError):
    """CSV header or column set does not match the documented schema."""


class DataError(SwitchAdjustError, ValueError):
    """A row violates a dataset invariant (negative time, switch after death, ...)."""


class ConfigError(SwitchAdjustError):
    """Invalid configuration value; message names the offending key."""


class EmptyInput(SwitchAdjustError):
    """An estimator received no samples."""


class DegenerateRiskSet(SwitchAdjustError):
    """No events anywhere; the test statistic is undefined."""


class NonConvergence(SwitchAdjustError):
    """Iterative fit hit its iteration cap or diverged (separation)."""


class EmptyArmAfterExclusion(SwitchAdjustError):
    """Excluding switchers left an arm empty or event-free."""


class NoEventsAfterRecoding(SwitchAdjustError):
    """Censoring switchers at switch time removed every event."""


class PerfectPrediction(SwitchAdjustError):
    """A covariate pattern deterministically predicts switching; IPCW cannot run."""


class MissingLevelParameter(SwitchAdjustError):
    """The acceleration-parameter vector has no entry for a patient's switch level."""


class NoSolutionInRange(SwitchAdjustError):
    """The g-estimation objective attains its minimum at the grid boundary."""


class LevelCountExceeded(SwitchAdjustError):
    """More switch-destination levels than the stratified grid search supports."""


class InsufficientTraining(SwitchAdjustError):
    """Not enough usable training rows to grow a regression forest."""


class FeatureMismatch(SwitchAdjustError):
    """Prediction row does not have the feature count the forest was trained on."""


class CalibrationFailure(SwitchAdjustError):
    """Pilot bisection could not reach the requested switch or censor fraction."""


class AllReplicatesFailed(SwitchAdjustError):
    """Every replicate of a (scenario, method) cell errored; no metrics possible."""
