"""Exception hierarchy shared by all hopfkit modules."""


class HopfError(Exception):
    """Base class for every error raised by hopfkit."""


class ConfigurationError(HopfError):
    """Bad problem definition, missing constant, or invalid option."""


class CatalogError(ConfigurationError, LookupError):
    """Unknown catalog identifier."""

    def __init__(self, name, available):
        self.name = name
        self.available = tuple(available)
        super().__init__(
            f"unknown problem {name!r}; available: {', '.join(self.available)}"
        )


class EvaluationError(HopfError):
    """A user callback returned a non-finite value."""

    def __init__(self, what, point):
        self.what = what
        self.point = point
        super().__init__(f"{what} is not finite at {point!r}")


class DomainError(HopfError):
    """Argument outside the admissible domain (time horizon, dom of the conjugate)."""


class InfeasibleError(HopfError):
    """The maximization grid never meets the effective domain of the conjugate."""


class SearchWindowError(HopfError):
    """A root search returned nothing; window or resolution is inadequate."""


class PreconditionError(HopfError):
    """An operation was called on inputs violating its documented precondition."""
