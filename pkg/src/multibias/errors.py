"""Error types shared by every module.

All input/data problems raise :class:`DataError` carrying a stable ``code``
string so callers (and the CLI, which maps them to exit status 2) can react
without parsing messages.
"""

from __future__ import annotations


class DataError(Exception):
    """Invalid input data or a violated operation precondition."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code

    def __str__(self) -> str:
        return f"[{self.code}] {self.args[0]}"


class UsageError(Exception):
    """Bad invocation (unknown flag combinations, unsupported formats)."""
