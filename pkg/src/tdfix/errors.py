"""Exception hierarchy. Each family maps to one CLI exit code."""


class TdfixError(Exception):
    exit_code = 1


class ConfigError(TdfixError, ValueError):
    exit_code = 2


class ParameterError(ConfigError):
    """Invalid argument to a numeric operation (stride, probability, ids)."""


class ShapeError(ConfigError):
    pass


class DataError(TdfixError, ValueError):
    exit_code = 3


class ParseError(DataError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class ConsistencyError(DataError):
    """An activation bundle does not belong to the model it is decoded with."""


class NumericError(TdfixError, ArithmeticError):
    exit_code = 4
