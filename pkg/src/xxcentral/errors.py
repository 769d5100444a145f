"""Exception hierarchy shared by all xxcentral modules."""

from __future__ import annotations


class XXCentralError(Exception):
    """Base class for every error raised by this package."""


class DuplicateCouplings(XXCentralError, ValueError):
    pass


class NonPositiveCoupling(XXCentralError, ValueError):
    pass


class UnsupportedShape(XXCentralError, ValueError):
    pass


class ZeroField(XXCentralError, ValueError):
    pass


class InvalidParameters(XXCentralError, ValueError):
    """Raised when a ModelParams invariant does not hold."""


class DegenerateSeed(XXCentralError):
    pass


class NoConvergence(XXCentralError):
    def __init__(self, iterations: int, final_residual: float, message: str = ""):
        self.iterations = iterations
        self.final_residual = final_residual
        super().__init__(
            message
            or f"Newton failed after {iterations} iterations (residual {final_residual:.3e})"
        )


class SingularJacobian(XXCentralError):
    pass


class StepUnderflow(XXCentralError):
    def __init__(self, last_good_g: float, step: float):
        self.last_good_g = last_good_g
        self.step = step
        super().__init__(
            f"continuation step {step:.3e} underflowed at g={last_good_g!r}; "
            "possible level crossing or branch singularity"
        )


class ExtrapolationUnstable(XXCentralError):
    pass


class TooLarge(XXCentralError, ValueError):
    pass


class InvalidDelta(XXCentralError, ValueError):
    pass


class MatchFailure(XXCentralError):
    def __init__(self, message: str, outliers: list[int]):
        self.outliers = outliers
        super().__init__(message)


class SchemaError(XXCentralError, ValueError):
    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")
