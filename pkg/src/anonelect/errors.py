"""Exception types shared across the package."""


class InfeasibleParams(ValueError):
    """Raised when (n, m, d) admit no algorithm of the requested kind."""


class UnknownProcess(KeyError):
    pass


class AddressOutOfRange(IndexError):
    pass


class StateBoundExceeded(RuntimeError):
    """The explorer visited more states than allowed.

    ``partial`` carries whatever had been collected when the bound was hit.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class BudgetExceeded(RuntimeError):
    pass
