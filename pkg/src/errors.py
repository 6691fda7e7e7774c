from __future__ import annotations

from .enums import ExitCode


class BellSimError(Exception):
    """
    Base class of every error raised by the package.

    The CLI maps each subclass to a process exit code.
    """
    exit_code: ExitCode = ExitCode.MODEL_ERROR


class InputError(BellSimError):
    """
    Bad user input: numbers, config files, event tables.
    """
    exit_code = ExitCode.INPUT_ERROR


class InvalidInputError(InputError):
    pass


class ConfigError(InputError):
    pass


class EventTableError(InputError):
    pass


class InsufficientDataError(InputError):
    pass


class ModelError(BellSimError):
    """
    A model cannot do what was asked of it.
    """
    exit_code = ExitCode.MODEL_ERROR


class UnknownModelError(ModelError):
    def __init__(self, name: str, known: list[str]) -> None:
        super().__init__(
            f"unknown model {name!r}; catalog entries: {', '.join(sorted(known))}"
        )
        self.name = name
        self.known = known


class UnsupportedContextError(ModelError):
    pass


class OracleOnlyError(ModelError):
    pass


class QuadratureBudgetError(ModelError):
    pass
