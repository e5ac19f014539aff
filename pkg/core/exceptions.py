class InvalidInput(ValueError):
    """Raised for malformed arguments: bad shapes, lengths, ranges or files."""


class NumericFailure(ArithmeticError):
    """Raised when a computation produces non-finite values.

    ``trace`` holds whatever optimisation trace was recorded before the failure,
    so callers can still write it out for diagnosis.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
