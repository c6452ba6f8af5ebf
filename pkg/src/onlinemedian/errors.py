"""Exception types raised by the library."""


class OnlineMedianError(Exception):
    """Base class for all library errors."""


class NumericalInputError(OnlineMedianError, ValueError):
    """Non-finite or otherwise unusable numerical input."""


class DimensionError(OnlineMedianError, ValueError):
    """Array shapes do not agree."""


class DecompositionError(OnlineMedianError, ValueError):
    """A matrix factorization failed (e.g. non positive-definite input)."""


class DegenerateSampleError(OnlineMedianError, ValueError):
    """An observation coincides with the evaluation point."""


class ConfigurationError(OnlineMedianError, ValueError):
    """Invalid hyperparameter or experiment configuration.

    ``field`` carries a dotted path to the offending entry when known.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class InvalidDirectionError(OnlineMedianError, ValueError):
    """A confidence-interval direction is the zero vector."""


class NumericalDegeneracyError(OnlineMedianError, ArithmeticError):
    """A variance form that should be positive is not."""


class DomainError(OnlineMedianError, ValueError):
    """Argument outside the domain of a special function."""


class NonConvergenceError(OnlineMedianError, RuntimeError):
    """An iterative solver hit its iteration cap.

    The last iterate and diagnostics are kept on the exception.
    """

    def __init__(self, message: str, last_iterate, n_iter: int, grad_norm: float):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.n_iter = n_iter
        self.grad_norm = grad_norm
