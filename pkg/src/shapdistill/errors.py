"""Exception hierarchy shared across the toolkit.

Each class maps to a distinct CLI exit code (see cli.EXIT_CODES).
"""


class ShapDistillError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ShapDistillError):
    """Bad configuration: unknown environment, malformed config file, bad paths."""


class ContractError(ShapDistillError):
    """A call violated an operation's precondition (dimension mismatch, empty input, ...)."""


class StageOrderError(ShapDistillError):
    """A pipeline stage was invoked before the stage that produces its input artifact."""


class NumericError(ShapDistillError):
    """Non-finite values where finite ones are required (diverged training, bad state)."""


class DegenerateFitError(ShapDistillError):
    """Hyperplane regression received rank-deficient input (e.g. all points identical)."""


class BridgeError(ShapDistillError):
    """External-policy bridge failure: timeout, malformed message, protocol violation."""
