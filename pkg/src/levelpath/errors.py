"""Exception types shared across the library."""


class LevelPathError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(LevelPathError):
    """Shapes of weights, biases or data do not match the network spec."""

    def __init__(self, layer: int, message: str):
        self.layer = layer
        super().__init__(f"layer {layer}: {message}")


class PreconditionError(LevelPathError):
    """An operation was called on inputs that violate its contract."""


class Infeasible(LevelPathError):
    """A linear system has no solution within the feasibility tolerance."""

    def __init__(self, residual: float, tol: float, message: str = ""):
        self.residual = residual
        self.tol = tol
        detail = message or "least-squares residual exceeds tolerance"
        super().__init__(f"{detail} (residual {residual:.3e} > tol {tol:.3e})")


class RankNotRestored(LevelPathError):
    """Random redraws failed to reach full rank within the retry budget."""


class NoDependentColumn(LevelPathError):
    """No feature column lies in the span of its predecessors.

    Signals that the numeric rank precondition of the first-layer
    alignment was violated; rerunning rank restoration with a looser
    tolerance usually fixes it.
    """


class HomotopyFailed(LevelPathError):
    """The numerical path optimizer exhausted its budget above the bound.

    This is reported as "no path found", never as a proof that no path
    exists.
    """


class DegenerateDeterminant(LevelPathError):
    """A determinant sign needed by a certificate is numerically zero."""


class TrainingDiverged(LevelPathError):
    """Gradient descent produced non-finite loss; lower the learning rate."""
