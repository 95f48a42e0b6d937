"""Exception types shared across the package."""


class NldecayError(Exception):
    """Base class for package errors."""


class DomainError(NldecayError, ValueError):
    """A query falls outside the domain of a function or map."""


class NumericError(NldecayError, ArithmeticError):
    """A computation produced a non-finite value."""


class ValidationError(NldecayError, ValueError):
    """An object violates one of its construction invariants."""


class ConfigError(NldecayError, ValueError):
    """A configuration is malformed or inconsistent."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class CatalogLookupError(NldecayError, KeyError):
    """Unknown catalog identifier."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown catalog id"
