"""Exception hierarchy shared by all modules."""


class SplittingError(Exception):
    """Base class for every failure raised by :mod:`strangsplit`."""


class DimensionError(SplittingError, ValueError):
    pass


class BoundarySpecError(SplittingError, ValueError):
    pass


class ConfigError(SplittingError, ValueError):
    pass


class NumericalFailure(SplittingError):
    """A failure of the numerics (as opposed to bad input)."""


class KrylovConvergenceError(NumericalFailure):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual estimate {residual:.3e})")
        self.residual = residual


class BlowUpError(NumericalFailure):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class MultigridConvergenceError(NumericalFailure):
    def __init__(self, message, residual):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


class TraceMismatchError(NumericalFailure):
    def __init__(self, face, discrepancy):
        super().__init__(f"corrector trace mismatch on face {face!r}: "
                         f"relative discrepancy {discrepancy:.3e}")
        self.face = face
        self.discrepancy = discrepancy


class CorrectorBoundError(NumericalFailure):
    pass


class StepFailure(NumericalFailure):
    """Wraps a numerical failure with the index of the step that raised it."""

    def __init__(self, step, cause):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause
