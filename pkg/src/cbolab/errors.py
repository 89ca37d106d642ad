"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration and precondition problems
exit with 1, numeric failures (non-finite particle positions) exit with 2.
"""


class InputError(ValueError):
    """Malformed arguments to an operation (shape or size mismatch)."""


class ConfigurationError(ValueError):
    """Invalid configuration: unknown names, bad keys, violated setup rules."""


class PreconditionError(ConfigurationError):
    """A theory precondition does not hold for the requested parameters."""


class NumericError(RuntimeError):
    """A simulation produced a non-finite value; carries particle/step context."""


class FitError(RuntimeError):
    """A regression cannot be performed on the requested window."""
