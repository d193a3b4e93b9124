"""Exception hierarchy for the queue analysis pipeline."""


class QueueModelError(Exception):
    """Base class for analysis failures that carry diagnostic context."""


class UnstableSystemError(QueueModelError):
    """The queue has nonpositive drift toward zero and no stationary law."""

    def __init__(self, margin, message=None):
        self.margin = float(margin)
        super().__init__(message or f"queue is unstable (stability margin {self.margin:.6g} <= 0)")


class SingularMatrixError(QueueModelError):
    """A matrix the solver must invert is singular."""

    def __init__(self, matrix_name, parameter=None):
        self.matrix_name = matrix_name
        self.parameter = parameter
        msg = f"{matrix_name} is singular"
        if parameter:
            msg += f" (degenerate parameter: {parameter})"
        super().__init__(msg)


class ConvergenceError(QueueModelError):
    def __init__(self, iterations, residual):
        self.iterations = int(iterations)
        self.residual = float(residual)
        super().__init__(
            f"rate-matrix iteration did not converge after {self.iterations} "
            f"iterations (last residual {self.residual:.3e})"
        )
