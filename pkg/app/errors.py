from __future__ import annotations
from enum import IntEnum


class ExitCode(IntEnum):
    PASS = 0
    FAIL = 1
    USAGE = 2
    COUNTEREXAMPLE = 3
    IO = 4


class CubeOUError(RuntimeError):
    pass


class ArgumentError(CubeOUError, ValueError):
    """A precondition on an operation's arguments does not hold."""


class SizeLimitError(ArgumentError):
    """Enumeration would exceed the supported size (Bell numbers, d^L)."""


class DegenerateEnsembleError(ArgumentError):
    pass


class ConfigError(CubeOUError):
    pass


class OutputError(CubeOUError):
    pass
