"""Error hierarchy. Each class carries the CLI exit code it maps to."""


class RetrainSimError(Exception):
    exit_code = 4


class ValidationError(RetrainSimError, ValueError):
    exit_code = 2


class ConfigurationError(ValidationError):
    pass


class SequencingError(ValidationError):
    pass


class DataError(RetrainSimError, ValueError):
    exit_code = 3


class SchemaError(DataError):
    pass


class ParseError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class EmptyClassError(DataError):
    pass


class StratificationError(DataError):
    pass


class UndefinedMetricError(DataError):
    pass


class InstrumentationError(RetrainSimError, RuntimeError):
    exit_code = 4
