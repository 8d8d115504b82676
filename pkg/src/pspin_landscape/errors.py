"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested function."""


class RegimeError(ValueError):
    """The requested quantity is only defined in another field-strength regime."""


class ToleranceError(RuntimeError):
    """A numerical routine could not reach its requested accuracy."""


class ResourceError(ValueError):
    """The request exceeds a documented size limit."""
