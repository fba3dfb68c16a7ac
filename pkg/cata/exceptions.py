class CataError(Exception):
    """Base class for every error raised by the cata package."""


class ParameterError(CataError, ValueError):
    """A numeric input or configuration value is outside its valid range."""


class ProtocolError(CataError):
    """The auction tried to break the single-assignment constraints."""


class AuctionTimeout(CataError):
    """The auction used up ``max_rounds`` before terminating.

    Attributes:
        partial (AuctionResult): The result accumulated up to the timeout.
    """

    def __init__(self, message: str, partial):
        super().__init__(message)
        self.partial = partial


class OracleSizeError(CataError):
    """The instance is too large for exhaustive enumeration."""


class SpecError(CataError, ValueError):
    """A world spec describes an impossible layout."""


class InputFileError(CataError):
    """A user supplied file is malformed.

    Attributes:
        path (str): The offending file.
        line (int | None): 1-based line of the problem when known.
    """

    def __init__(self, message: str, path: str, line: int | None = None):
        self.path = str(path)
        self.line = line
        self.detail = message
        super().__init__(self.anchored())

    def anchored(self) -> str:
        if self.line is None:
            return f"{self.path}: {self.detail}"
        return f"{self.path}:{self.line}: {self.detail}"


class ConfigError(InputFileError):
    """The YAML configuration file cannot be used."""


class WorldFormatError(InputFileError):
    """A world or assignment file does not follow the expected schema."""


class OutputError(CataError):
    """An artifact could not be written."""

    def __init__(self, message: str, path: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")
