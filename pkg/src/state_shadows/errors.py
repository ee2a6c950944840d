"""Exception hierarchy shared by all modules."""


class ShadowError(Exception):
    """Base class for every error raised by this package."""


class NonHermitianError(ShadowError, ValueError):
    pass


class NoConvergenceError(ShadowError, RuntimeError):
    pass


class LengthMismatchError(ShadowError, ValueError):
    pass


class DimMismatchError(ShadowError, ValueError):
    pass


class SizeLimitError(ShadowError, ValueError):
    pass


class NotEnumerableError(ShadowError, ValueError):
    pass


class SupportLeakError(ShadowError, ValueError):
    """Moment operator has weight outside the symmetric subspace."""


class NonPositiveObservableError(ShadowError, ValueError):
    pass


class ConfigError(ShadowError, ValueError):
    pass
