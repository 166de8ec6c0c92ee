"""Exception taxonomy shared across the package.

Exit-code mapping for the CLI: domain errors (bad values, bad shapes,
bad configuration) exit 1; environment errors (I/O, missing upstream
artifacts) exit 2.
"""


class VoxboostError(Exception):
    """Base class for all domain errors raised by this package."""

    exit_code = 1


class InvalidInputError(VoxboostError):
    """An operation received data violating its preconditions."""


class ConfigError(VoxboostError):
    """A configuration value or combination of values is unusable."""


class InternalError(VoxboostError):
    """An internal consistency check failed; indicates a bug."""


class MissingArtifactError(VoxboostError):
    """A pipeline stage requires an on-disk artifact that does not exist."""

    exit_code = 2
