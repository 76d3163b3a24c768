"""Exception types. The CLI maps each family to an exit code."""


class FairIMError(Exception):
    exit_code = 1


class ConfigError(FairIMError, ValueError):
    exit_code = 2


class DataError(FairIMError, ValueError):
    exit_code = 3


class NumericalError(FairIMError, ArithmeticError):
    exit_code = 4
