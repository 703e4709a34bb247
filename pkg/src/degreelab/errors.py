"""Exception hierarchy.

Every error carries an optional machine-readable payload so the CLI can
emit structured failure records.
"""


class DegreeLabError(Exception):
    """Base class for all library errors."""

    def __init__(self, message, **payload):
        super().__init__(message)
        self.payload = payload

    def record(self):
        """Machine-readable failure record."""
        return {
            "error": type(self).__name__,
            "message": str(self),
            **self.payload,
        }


class DimensionMismatchError(DegreeLabError):
    """Class coordinates do not match the lattice rank."""


class SingularPairingError(DegreeLabError):
    """The intersection form is not invertible over the rationals."""


class HypothesisViolation(DegreeLabError):
    """A spectral hypothesis (r1^2 > lambda2) fails for the given data."""


class ModelRejected(DegreeLabError):
    """Family parameters violate a model invariant."""


class IndeterminateError(DegreeLabError):
    """Evaluation requested at an indeterminacy point."""


class UnsupportedError(DegreeLabError):
    """Operation not defined for this family or lattice."""


class PreconditionError(DegreeLabError):
    """A documented precondition of the operation fails."""


class BudgetError(DegreeLabError):
    """A resource budget (degree, monomials, tree size) was exceeded."""


class NumericalFailure(DegreeLabError):
    """Root finding or orbit evaluation failed numerically."""


class DegreeDropError(NumericalFailure):
    """Leading coefficient degenerated after substitution."""


class StructuralFailure(DegreeLabError):
    """A structural identity that should hold for the model was violated."""
