"""Exception hierarchy shared by every module."""


class TdhoError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""

    exit_code = 3


class ConfigError(TdhoError):
    exit_code = 2


class ParseError(ConfigError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class ValidationError(ConfigError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class NumericalError(TdhoError):
    exit_code = 3


class NonFiniteSigma(NumericalError):
    pass


class StepFailure(NumericalError):
    pass


class TrappedTrajectory(NumericalError):
    pass


class BadFit(NumericalError):
    pass


class OutOfRange(NumericalError, ValueError):
    pass


class OutOfDomain(NumericalError, ValueError):
    pass


class ZeroTau(NumericalError, ValueError):
    pass


class SingularFactor(NumericalError):
    pass


class NonpositiveTime(NumericalError, ValueError):
    pass


class MassDrift(NumericalError):
    pass


class NonFinite(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class NoContraction(NumericalError):
    pass


class LambdaOutOfRange(NumericalError, ValueError):
    pass


class InsufficientSamples(NumericalError, ValueError):
    pass


class NonPositiveError(NumericalError, ValueError):
    pass


class InsufficientSpan(NumericalError, ValueError):
    pass


class InadmissiblePair(NumericalError, ValueError):
    pass
