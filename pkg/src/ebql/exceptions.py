"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """A numeric argument violates its documented precondition."""


class InvalidPartitionError(ValueError):
    """A requested K-way split cannot be built from the given samples."""


class UnsupportedDimensionError(ValueError):
    """A closed form was requested for a shape it does not cover."""


class InvalidActionError(ValueError):
    """An action is out of range for the current state, or the episode is over."""


class ConfigError(ValueError):
    """Experiment configuration could not be parsed or validated."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class SchemaError(ValueError):
    """A record does not match the declared CSV schema."""

    def __init__(self, message, column=None):
        self.column = column
        super().__init__(message)
