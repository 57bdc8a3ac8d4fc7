class LmapfError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(LmapfError, ValueError):
    """An argument violates the operation's preconditions."""


class MapParseError(LmapfError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class PlacementError(LmapfError):
    """Agents/goals could not be placed under the episode constraints."""


class ContractError(LmapfError):
    """A policy or caller broke the simulator contract (strict mode)."""
