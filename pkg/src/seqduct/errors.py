"""Exception types shared across the package."""


class SeqductError(Exception):
    """Base class for package-specific failures."""


class ShapeError(SeqductError):
    """An op received operands with incompatible shapes."""


class ContractError(SeqductError):
    """An API was called in a way its contract forbids."""


class ConfigError(SeqductError):
    """A config file or preset is malformed or has unknown keys."""


class DataError(SeqductError):
    """A dataset file is missing, truncated, or inconsistent."""


class DivergenceError(SeqductError):
    """Training produced a non-finite loss or gradient."""
