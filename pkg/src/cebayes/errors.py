"""Exception taxonomy.

Two families matter to the CLI: configuration problems (exit code 2) and
numeric failures during a run (exit code 3). Everything else is a plain
ValueError-style programming error.
"""


class ConfigError(ValueError):
    """A problem with user-supplied configuration or incompatible inputs."""


class ParseError(ConfigError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at byte offset {position})"
        super().__init__(message)


class ValidationError(ConfigError):
    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class UnknownModel(ConfigError):
    pass


class UnknownFilter(ConfigError):
    pass


class IncompatibleBundles(ConfigError):
    pass


class TimeGridMismatch(ConfigError):
    """Observation times do not sit on the model's step grid."""


class NumericError(ArithmeticError):
    """A numeric failure inside a filter or model evaluation."""


class MismatchedSampleSpace(NumericError):
    """Two random variables do not live on the same sample space."""


class BadLevel(NumericError):
    """Quantile level outside the open interval (0, 1)."""


class BadBandwidth(NumericError):
    """Kernel bandwidth is not a positive number or 'auto'."""


class UnsupportedFamily(NumericError):
    """Germ distribution family outside the supported set."""


class ShapeMismatch(NumericError):
    pass


class NegativeTargetVariance(NumericError):
    """A fitted variance surrogate predicted a non-positive posterior variance."""


class NotSPD(NumericError):
    def __init__(self, message: str, smallest_eigenvalue: float | None = None):
        self.smallest_eigenvalue = smallest_eigenvalue
        if smallest_eigenvalue is not None:
            message = f"{message} (smallest eigenvalue {smallest_eigenvalue:.6e})"
        super().__init__(message)


class NonFiniteState(NumericError):
    """A model evaluation produced NaN or infinity."""
