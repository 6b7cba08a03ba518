from __future__ import annotations


class VerifyError(Exception):
    """Base class for every error raised by the toolkit."""


class ScenarioError(VerifyError, ValueError):
    """Invalid scenario file or CLI override (exit code 2)."""


class UnknownLabelError(VerifyError, KeyError):
    def __init__(self, label):
        super().__init__(label)
        self.label = label

    def __str__(self) -> str:
        return f"unknown label: {self.label!r}"


class PreconditionError(VerifyError, ValueError):
    pass


class SolveError(VerifyError, ArithmeticError):
    """Singular solve, or an operator outside the generated algebra."""


class ResolutionError(VerifyError):
    """Both or neither of two candidate normalizations satisfied an oracle."""


class CapExceededError(VerifyError):
    pass
