"""Exception types shared by the library and the command line front end.

Each class carries the process exit code the CLI uses when it escapes.
"""


class InputDesignError(Exception):
    exit_code = 1


class ConfigError(InputDesignError, ValueError):
    """Invalid alphabet, memory, model parameters or configuration file."""

    exit_code = 2


class ModelError(ConfigError):
    """Model parameters that cannot be simulated (e.g. unstable denominator)."""


class ResourceLimitError(InputDesignError):
    """The instance is too large for exhaustive cycle enumeration."""

    exit_code = 3


class NumericalError(InputDesignError, ArithmeticError):
    exit_code = 4


class SingularDesignError(NumericalError):
    """The information matrix is singular where the criterion needs it finite."""


class NotConvergedError(InputDesignError):
    exit_code = 5
