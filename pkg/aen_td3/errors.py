"""Categorized errors raised across aen_td3."""


class AenTd3Error(Exception):
    """Base class for every error this package raises on purpose."""

    category = "error"
    exit_code = 1


class ShapeError(AenTd3Error, ValueError):
    """Vector or parameter layout does not match what was expected."""

    category = "shape"
    exit_code = 4


class ConfigError(AenTd3Error, ValueError):
    """Invalid or inconsistent configuration."""

    category = "config"
    exit_code = 2


class ModeError(AenTd3Error, RuntimeError):
    """Operation not available in the agent's mode (e.g. AEN in centralized mode)."""

    category = "mode"
    exit_code = 5


class EnvStateError(AenTd3Error, RuntimeError):
    """Environment used out of order, e.g. stepping a finished episode."""

    category = "state"
    exit_code = 6


class CheckpointError(AenTd3Error, ValueError):
    """Checkpoint missing, malformed or incompatible with the config."""

    category = "checkpoint"
    exit_code = 3


class PreconditionError(AenTd3Error, ValueError):
    """Operation called with inputs violating its precondition (empty batch, ...)."""

    category = "precondition"
    exit_code = 7
