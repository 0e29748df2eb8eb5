"""Exception hierarchy. Every error carries the CLI exit code it maps to."""

from typing import Optional


EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3
EXIT_SUITE_ERROR = 4


class UrnlabError(Exception):
    """Base exception for urnlab errors"""
    exit_code: int = EXIT_RUNTIME


class ConfigurationError(UrnlabError):
    """Malformed configuration file, acceptance file or command-line arguments"""
    exit_code = EXIT_USAGE


class InvalidInputError(UrnlabError, ValueError):
    """A pure operation was called outside its domain"""
    exit_code = EXIT_USAGE


class NumericalError(UrnlabError):
    """The urn state became non-finite"""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step


class GuardViolationError(UrnlabError):
    """A pathwise guarantee failed; this always indicates an implementation bug"""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step


class BatchAbortedError(UrnlabError):
    """A replication worker failed; `partial` holds the non-authoritative results"""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class ProxyUnavailableError(UrnlabError):
    """The record was not extended far enough to read a Z-infinity proxy"""


class MissingGridPointError(UrnlabError):
    """A statistic needs a step that the record grid does not contain"""


class UnequalMeansError(UrnlabError):
    """A CLT statistic was requested for a batch generated with m1 != m2"""


class ReplicationPlanError(UrnlabError):
    """The requested margin is unreachable under the replication cap"""


class SuiteExecutionError(UrnlabError):
    """A verification suite could not be executed (distinct from a failed verdict)"""
    exit_code = EXIT_SUITE_ERROR
