"""Exception hierarchy shared by the library and the command line.

Every error carries a short machine-parsable ``reason`` and the process exit
code the command line maps it to.
"""


class FkmError(Exception):
    reason = "error"
    exit_code = 1


class DataError(FkmError):
    reason = "data"


class SchemaError(DataError):
    reason = "schema"


class ParseError(DataError):
    reason = "parse"

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class EmptyDataError(DataError):
    reason = "empty-data"


class ValidationError(DataError):
    reason = "validation"

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DomainError(FkmError):
    reason = "domain"


class BasisError(FkmError):
    reason = "basis"


class NumericError(FkmError):
    reason = "numeric"


class ConfigError(FkmError):
    reason = "config"
    exit_code = 2
