"""Exception types shared across the package."""


class FootlocError(Exception):
    """Base class for all footloc errors."""


class ParseError(FootlocError):
    """A delimited-text field could not be parsed. Carries the 1-based row number."""

    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class EmptyInputError(FootlocError):
    """An input stream or table contained no data rows."""


class InsufficientCoverageError(FootlocError):
    """Too few point returns fell inside an observation's focal window."""

    def __init__(self, observation_id, n_points, min_points):
        self.observation_id = observation_id
        self.n_points = n_points
        super().__init__(
            f"observation {observation_id!r}: only {n_points} points in focal "
            f"window (minimum {min_points})"
        )


class EmptyFootprintError(FootlocError):
    """No point returns within the capture radius of a candidate center."""


class MissingCloudError(FootlocError):
    """One or more observations have no matching point-cloud file."""

    def __init__(self, ids):
        self.ids = list(ids)
        super().__init__(
            "missing point-cloud files for observation ids: " + ", ".join(self.ids)
        )


class ConfigError(FootlocError):
    """A run configuration value is missing, unknown, or out of range."""


class InitializationError(FootlocError):
    """The sampler's log posterior is not finite at its starting state."""
