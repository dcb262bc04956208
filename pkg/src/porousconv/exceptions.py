"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A numeric argument is outside its admissible range."""


class ConfigurationError(ValueError):
    """A problem or run configuration is inconsistent."""


class NonConvergenceError(RuntimeError):
    """An iterative method ran out of budget.

    ``residual`` is the last measured residual, ``history`` the recorded
    sequence (residuals or ratios, depending on the raiser) and ``stage``
    names the sub-solve that failed when that is meaningful.
    """

    def __init__(self, message, residual=None, history=None, stage=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history) if history is not None else []
        self.stage = stage


class NoSolutionError(RuntimeError):
    """Shooting found no sign change of the far-field map in the bracket."""

    def __init__(self, message, brackets=()):
        super().__init__(message)
        self.brackets = list(brackets)
