"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input: malformed table, out-of-range element, bad parameter."""


class AlphabetCapError(RuntimeError):
    """Exact channel synthesis exceeded the output-alphabet budget.

    Carries the transform path prefix at which the budget was exceeded
    (when known).  Exact synthesis is all-or-nothing: callers that hit
    this should switch to the Monte Carlo estimation path.
    """

    def __init__(self, message, path_prefix=None):
        super().__init__(message)
        self.path_prefix = path_prefix
