"""Shared exception types.

Each maps to a process exit code in the command line tool: parameter
problems exit 2, size refusals exit 3, failed statistical verdicts and
replay mismatches exit 4.
"""


class AlignpercError(Exception):
    """Base class for package errors."""


class ParameterError(AlignpercError):
    """A parameter is out of range or inconsistent with the geometry."""


class PatternError(ParameterError):
    """An edge pattern is malformed (conflicting duplicates, bad axis)."""


class SizeRefusalError(AlignpercError):
    """A requested geometry exceeds the configured memory budget."""


class VerdictError(AlignpercError):
    """A statistical check or replay verification failed."""
