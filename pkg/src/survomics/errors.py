"""Exception hierarchy. Each class maps to a CLI exit code."""


class SurvomicsError(Exception):
    exit_code = 1


class ConfigError(SurvomicsError, ValueError):
    exit_code = 1


class DataError(SurvomicsError, ValueError):
    exit_code = 2


class NumericalError(SurvomicsError, ArithmeticError):
    exit_code = 3


class ConvergenceError(NumericalError):
    pass
