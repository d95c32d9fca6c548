class DataError(ValueError):
    """Invalid input data or configuration (CLI exit code 1)."""


class NumericalError(RuntimeError):
    """A numerical failure inside a kernel (CLI exit code 2)."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)
        self.iteration = iteration
