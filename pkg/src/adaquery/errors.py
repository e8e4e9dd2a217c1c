"""Exception and warning types shared across the package."""


class InvalidParameterError(ValueError):
    """A parameter violates an operation's precondition."""


class BudgetExhaustedError(RuntimeError):
    """The session's query budget is spent; the mechanism refuses to answer."""


class SampleSizeWarning(UserWarning):
    """The dataset is smaller than the sample-size guidance for the requested accuracy."""
