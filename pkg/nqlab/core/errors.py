"""
Exception hierarchy shared by every nqlab service.

Each class carries the process exit code the command-line front end
returns when the exception escapes a run.
"""


class NqLabError(Exception):
    """Base class for nqlab errors."""

    exit_code = 3


class ParameterOutOfRange(NqLabError, ValueError):
    exit_code = 2


class IndexOutOfRange(NqLabError, IndexError):
    exit_code = 2


class OrderTooHigh(NqLabError, ValueError):
    exit_code = 2


class TooCloseToJump(NqLabError, ValueError):
    exit_code = 2


class DerivativeUnavailable(NqLabError):
    pass


class SingularAtZero(NqLabError, ZeroDivisionError):
    pass


class NumericalFailure(NqLabError):
    """A computation could not reach its accuracy target."""


class QuadratureFailure(NumericalFailure):
    pass


class NonIntegrable(NumericalFailure):
    pass


class BudgetExceeded(NumericalFailure):
    pass


class ConfigInvalid(NqLabError):
    exit_code = 2

    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class CheckFailed(NqLabError):
    """An enabled check of a run did not pass; carries the run manifest."""

    exit_code = 1

    def __init__(self, message: str, manifest=None):
        self.manifest = manifest
        super().__init__(message)
