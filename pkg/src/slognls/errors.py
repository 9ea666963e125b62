"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class SlognlsError(Exception):
    """Base class for all library errors."""


class ParameterError(SlognlsError, ValueError):
    """A parameter is outside its admissible range or violates a hypothesis."""


class StructuralError(ParameterError):
    """Array shape / layout does not match the grid it claims to live on."""


class ConfigError(ParameterError):
    """Invalid run configuration (unknown key, bad value, violated constraint)."""


class DivergenceError(SlognlsError, ArithmeticError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, message, step=None, last_snapshot=None):
        super().__init__(message)
        self.step = step
        self.last_snapshot = last_snapshot


class StatisticalPowerError(SlognlsError):
    """Ensemble too small for the requested estimator."""

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required
