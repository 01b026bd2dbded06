"""Exception hierarchy shared by the library and the command line."""

from __future__ import annotations


class QCausalError(Exception):
    """Base class for all library errors."""


class InputError(QCausalError, ValueError):
    """Malformed input: unknown variables, overlapping sets, bad files."""


class ValidationError(InputError):
    """A model or graph violates one or more structural rules.

    ``violations`` holds one human-readable message per broken rule.
    """

    def __init__(self, violations: list[str] | str):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ParseError(InputError):
    """A text file could not be parsed. Carries a 1-based line number."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        prefix = ""
        if source is not None:
            prefix = f"{source}:"
        if line is not None:
            prefix = f"{prefix}{line}:"
        super().__init__(f"{prefix} {message}" if prefix else message)


class ResourceError(QCausalError, RuntimeError):
    """A configured size cap would be exceeded."""
