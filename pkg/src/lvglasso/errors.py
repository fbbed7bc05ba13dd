"""Exception types shared across the toolkit."""


class EigenSolverError(RuntimeError):
    """The symmetric eigensolver failed to converge.

    Carries condition diagnostics of the offending matrix in the message.
    """


class NotPositiveDefiniteError(ValueError):
    """A matrix required to be positive definite is not."""


class DivergenceError(RuntimeError):
    """A solver iterate became non-finite.

    ``state`` holds the last finite solver state, for post-mortem inspection.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
