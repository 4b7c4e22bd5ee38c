"""Exception types shared across the library.

Every error raised on a documented failure path derives from ``AslError``,
so callers (and the CLI) can distinguish "bad input" from "solver gave up"
with two except clauses.
"""


class AslError(Exception):
    """Base class for all library errors."""


class InvalidInput(AslError):
    """Input violates a documented precondition or type invariant."""


class DegenerateTuple(InvalidInput):
    """A 4-tuple of projective points contains three collinear points."""


class TooFewVertices(InvalidInput):
    """Polygon has fewer vertices than the operation requires."""


class ZeroDifferential(InvalidInput):
    """All coefficients of a polynomial differential vanish."""


class ZeroOnPath(InvalidInput):
    """An integration path passes within the guard radius of a zero."""


class SolverFailure(AslError):
    """A numerical solve did not reach its target tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NonConvergence(SolverFailure):
    """Newton iteration exhausted its budget above tolerance."""


class BadTruncation(InvalidInput):
    """A zero of the differential sits too close to the truncation boundary."""


class InsufficientSamples(InvalidInput):
    """Not enough usable samples in the reliable region for a fit."""


class PathOutsideField(InvalidInput):
    """An integration path leaves the reliable region of a grid field."""


class StepUnderflow(SolverFailure):
    """Adaptive ODE stepping hit the minimum step size."""


class NotConverged(SolverFailure):
    """Ray limits still drifting at the largest scheduled radius."""


class PatternViolation(SolverFailure):
    """Transition matrices deviate from the expected unipotent pattern."""


class ConvexityViolation(InvalidInput):
    """A polygon (input or assembled) fails strict convexity."""


class MeshTooCoarse(SolverFailure):
    """Boundary layer of a support-function solve exceeds its budget."""


class TooCloseToBoundary(InvalidInput):
    """A jet probe point sits inside the unreliable boundary layer."""


class CountMismatch(SolverFailure):
    """Located zero multiplicity disagrees with the expected count."""


class OptimizationStall(SolverFailure):
    """Derivative-free search stalled; carries the best iterate found."""

    def __init__(self, message, best=None, discrepancy=None, diagnostics=None):
        super().__init__(message, diagnostics)
        self.best = best
        self.discrepancy = discrepancy
