"""Exception hierarchy shared by all modules."""


class DelayJSRError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(DelayJSRError, ValueError):
    """Invalid problem data (dimensions, delay sets, config files)."""


class UnsupportedInputError(DelayJSRError):
    """Input accepted by the model but not by the downstream analysis."""


class BudgetError(DelayJSRError):
    """An enumeration or vertex budget was exceeded.

    ``best`` optionally carries the best (lower, upper) bounds available when
    the budget ran out.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class PropagationExplosionError(BudgetError):
    pass


class GeometryError(DelayJSRError):
    pass


class LPFailureError(GeometryError):
    pass


class DegeneratePolytopeError(GeometryError):
    pass


class DimensionLimitError(GeometryError):
    pass


class UnstableError(DelayJSRError):
    """The switched error system is not certified stable (rho >= 1)."""


class JSRError(DelayJSRError):
    pass


class NotSMPError(JSRError):
    """The candidate product underestimates the joint spectral radius."""


class MaxIterError(JSRError):
    pass


class AllZeroProductsError(JSRError):
    pass


class NoStabilizingGainError(UnstableError):
    def __init__(self, message, best_rho=None, best_gain=None):
        super().__init__(message)
        self.best_rho = best_rho
        self.best_gain = best_gain
