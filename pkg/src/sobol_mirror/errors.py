"""Exception types raised across the package."""


class CapacityError(ValueError):
    """Requested size exceeds a hard memory cap (dense matrices, huge p)."""


class DomainError(ValueError):
    """Input lies outside the domain of a function (e.g. off the simplex)."""


class NumericalError(ArithmeticError):
    """A computation lost all precision (e.g. a normalizer underflowed)."""


class EvaluationError(RuntimeError):
    """The model could not produce a finite output.

    ``inputs`` holds the offending input vector when known; ``row`` is its
    index in the evaluated block, and ``iteration`` / ``replicate`` locate
    it in a run once the estimator has caught and annotated the error.
    """

    def __init__(self, message, inputs=None, row=None, iteration=None, replicate=None):
        super().__init__(message)
        self.message = message
        self.inputs = inputs
        self.row = row
        self.iteration = iteration
        self.replicate = replicate

    def located(self, iteration=None, replicate=None) -> "EvaluationError":
        """Copy of the error with its position in a run filled in."""
        return EvaluationError(
            self.message,
            self.inputs,
            self.row,
            self.iteration if iteration is None else iteration,
            self.replicate if replicate is None else replicate,
        )

    def __reduce__(self):
        return (EvaluationError, (self.message, self.inputs, self.row, self.iteration, self.replicate))

    def __str__(self):
        where = []
        if self.replicate is not None:
            where.append(f"replicate {self.replicate}")
        if self.iteration is not None:
            where.append(f"iteration {self.iteration}")
        return f"{self.message} ({', '.join(where)})" if where else self.message


class DegenerateSampleError(ValueError):
    """A sample has zero empirical variance."""


class InconsistencyError(ValueError):
    """A vector is not a valid set of closed indices."""


class UnsupportedModelError(ValueError):
    """The operation needs structure the model does not expose."""
