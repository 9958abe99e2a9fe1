"""Exception types shared across the toolkit."""


class NumericalAbort(RuntimeError):
    """A numerical routine stopped because continuing would corrupt results.

    Carries the originating module and a short reason so the command line
    front end can report ``module: reason`` and exit with status 3.
    """

    def __init__(self, module: str, reason: str):
        super().__init__(f"{module}: {reason}")
        self.module = module
        self.reason = reason


class GridMismatch(ValueError):
    """A field was combined with a grid it was not defined on."""
