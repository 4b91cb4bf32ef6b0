"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class BoostError(Exception):
    exit_code = 1


class ConfigError(BoostError, ValueError):
    exit_code = 2


class DataError(BoostError, ValueError):
    exit_code = 3


class NumericalError(BoostError, ArithmeticError):
    exit_code = 4


class ComplexityWarning(UserWarning):
    """Base-learners with unequal degrees of freedom were mixed."""
