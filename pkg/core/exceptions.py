"""Exception hierarchy shared by every app."""


class SpecsError(Exception):
    """Base class for all toolkit errors.

    ``context`` carries whatever locates the failure (grid coordinates,
    split point, CSV row/column, replication index).
    """

    def __init__(self, message, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def with_context(self, **context):
        self.context.update(context)
        return self

    def __str__(self):
        if not self.context:
            return self.message
        details = ', '.join(f'{key}={value}' for key, value in sorted(self.context.items()))
        return f'{self.message} ({details})'


class InputError(SpecsError, ValueError):
    """Bad data, bad options or a violated precondition on user input."""


class RankDeficiencyError(InputError):
    """A matrix that must have full column rank does not."""


class NumericalError(SpecsError, ArithmeticError):
    """Floating point breakdown: NaN iterates, singular systems."""


class ConvergenceError(NumericalError):
    """Raised by callers that insist on a converged solution."""


class ExplosiveProcessError(NumericalError):
    """A simulated system has roots strictly inside the unit circle."""
