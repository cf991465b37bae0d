"""Exception hierarchy shared across the package.

Each class maps to a distinct CLI exit code (see cli.EXIT_CODES).
"""


class EiwError(Exception):
    """Base class for all package errors."""


class ConfigError(EiwError):
    """Invalid configuration value or malformed config file."""


class ContractError(EiwError):
    """Shape / dimension mismatch or violated call precondition."""


class SceneGenerationError(EiwError):
    """Scene constraints could not be satisfied after bounded retries."""


class TrainingError(EiwError):
    """Non-finite loss or gradients during training."""


class StagingError(EiwError):
    """Operation invoked before its prerequisite stage completed."""


class FileFormatError(EiwError):
    """Malformed checkpoint, scene, or metrics file."""
