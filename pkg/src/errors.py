"""Exception hierarchy shared by all modules.

The CLI maps each family to an exit code: configuration and data problems
exit with 1, exhausted model backends exit with 2.
"""


class SemiQAError(Exception):
    """Base class for every error raised by semiqa."""

    exit_code = 1


class ConfigError(SemiQAError):
    """Invalid or incomplete run configuration."""


class DataError(SemiQAError):
    """Input data that cannot be parsed or does not match its schema."""


class BackendError(SemiQAError):
    """Failure talking to the completion backend."""

    exit_code = 2
