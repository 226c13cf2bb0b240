class AdaptationError(Exception):
    """Base class for every error raised by the adaptation framework."""

    exit_code = 1


class ConfigurationError(AdaptationError, ValueError):
    """Invalid run configuration or model/aligner combination."""

    exit_code = 1


class DataError(AdaptationError, ValueError):
    """Malformed corpus, embedding, label or feature file."""

    exit_code = 2


class ShapeError(AdaptationError, ValueError):
    """Tensor shapes do not conform to a primitive's rules."""

    exit_code = 3


class DomainError(AdaptationError, ValueError):
    """Input outside the mathematical domain of a primitive (e.g. ln of 0)."""

    exit_code = 3


class TapeError(AdaptationError, RuntimeError):
    """Backward requested without a usable computation record."""

    exit_code = 3


class NumericalError(AdaptationError, ArithmeticError):
    """Non-finite values reached the optimizer; the iteration is aborted."""

    exit_code = 3
