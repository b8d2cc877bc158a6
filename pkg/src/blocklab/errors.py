"""Exception types shared across the package.

The CLI maps these onto its exit-code contract, so keep the hierarchy flat.
"""

from __future__ import annotations


class BlocklabError(Exception):
    """Base class for all package errors."""


class InstanceTooLargeError(BlocklabError):
    """The dynamic-programming table would exceed the configured cell budget."""


class OracleLimitError(BlocklabError):
    """An exhaustive search was asked to handle more items than it allows."""


class SearchLimitError(BlocklabError):
    """A verification scan would need too many mechanism evaluations."""


class ContractViolation(BlocklabError, ValueError):
    """An operation was called with arguments that break its preconditions."""


class ConfigurationError(BlocklabError, ValueError):
    """An era, scenario or generator configuration is inconsistent."""


class LedgerImbalanceError(BlocklabError):
    """Flow-of-funds accounting failed to balance. Should be unreachable."""


class ParseError(BlocklabError, ValueError):
    """An input file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
