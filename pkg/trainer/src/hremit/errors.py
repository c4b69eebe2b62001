"""Exception hierarchy for the emission trainer."""


class TrainerError(Exception):
    """Base class for everything raised on purpose by this package."""


class ConfigError(TrainerError):
    """Invalid configuration value or unknown configuration key."""


class FormatError(TrainerError):
    """Unreadable or malformed session directory / output path."""


class TrainingError(TrainerError):
    """Training diverged (non-finite loss) or cannot start."""
