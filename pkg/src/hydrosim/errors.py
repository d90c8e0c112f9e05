"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations


class HydroSimError(Exception):
    """Base class for every error raised by hydrosim."""


class DomainError(HydroSimError, ValueError):
    """An argument lies outside the domain of a physical relation.

    ``field`` names the offending parameter when one can be singled out,
    so the config layer can map it back to a dotted key.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class ConfigError(HydroSimError):
    """Base for scenario-file problems (CLI exit code 1)."""


class ConfigSyntaxError(ConfigError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{loc}")
        self.line = line
        self.column = column


class UnknownKeyError(ConfigError):
    def __init__(self, key: str):
        super().__init__(f"unknown key {key!r}")
        self.key = key


class InvariantError(ConfigError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class NumericalBlowup(HydroSimError, ArithmeticError):
    """Integration produced a non-finite state (CLI exit code 2)."""

    def __init__(self, t: float, state):
        super().__init__(f"non-finite state at t={t:.6g} s: {tuple(state)!r}")
        self.t = t
        self.state = tuple(state)


class CalibrationInfeasible(HydroSimError):
    """No parameterization in the search box reaches the target (exit code 3)."""
