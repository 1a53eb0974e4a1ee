"""All the project errors."""

from pathlib import Path
from typing import Optional
from typing import Union

from .utils import relative_path


class RelationalLimitsError(Exception):
    """The project base exception."""


class DomainError(RelationalLimitsError, ValueError):
    """An operation was called outside of its domain."""


class ResourceError(RelationalLimitsError):
    """An exhaustive enumeration would exceed its budget."""

    def __init__(self, what: str, needed: int, budget: int) -> None:
        super().__init__(f"{what} needs {needed} steps, budget is {budget}")
        self.needed = needed
        self.budget = budget


class FormatError(RelationalLimitsError, ValueError):
    """A text document or a coded family is malformed."""

    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        path: Optional[Union[Path, str]] = None,
    ) -> None:
        location = ""
        if path is not None:
            location = f"{relative_path(path)}:"
        if line is not None:
            location = f"{location}{line}:" if location else f"line {line}:"
        super().__init__(f"{location} {message}" if location else message)
        self.line = line
        self.path = path


class InvalidUtf8FileError(RelationalLimitsError):
    """The specified file is invalid."""

    def __init__(self, path: Union[Path, str]) -> None:
        super().__init__(f"Invalid UTF-8 file: {relative_path(path)}")


class InvalidYamlFileError(RelationalLimitsError):
    """The specified YAML file is invalid."""

    def __init__(self, path: Union[Path, str]) -> None:
        super().__init__(f"Invalid YAML file: {relative_path(path)}")


class InvalidConfigFileError(RelationalLimitsError):
    """The specified configuration file is invalid."""

    def __init__(self, path: Union[Path, str]) -> None:
        super().__init__(f"Invalid configuration file: {relative_path(path)}")
