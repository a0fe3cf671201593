"""Exception hierarchy shared by the solver, certifier and CLI."""

from __future__ import annotations


class GilbertError(Exception):
    """Base class. ``code`` is a short machine-readable tag used by the CLI."""

    code = "error"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class InvalidInputError(GilbertError, ValueError):
    code = "invalid-input"


class DegenerateDirectionError(GilbertError, ValueError):
    code = "degenerate-direction"


class DegenerateInstanceError(InvalidInputError):
    code = "degenerate-instance"


class InvalidTopologyError(GilbertError, ValueError):
    code = "invalid-topology"


class SizeLimitError(GilbertError):
    code = "size-limit"


class PreconditionError(GilbertError):
    code = "precondition"


class ConvergenceError(GilbertError, RuntimeError):
    """Raised when an optimization stage exhausts its iteration budget.

    ``best`` holds the best iterate found (whatever the raiser had at hand).
    """

    code = "convergence"

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best
