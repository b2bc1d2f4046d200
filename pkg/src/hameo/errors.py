"""Exception hierarchy. Every error raised on purpose derives from HameoError."""


class HameoError(Exception):
    pass


class ConfigurationError(HameoError, ValueError):
    """Bad resolution, malformed expression, unknown config key."""


class DomainError(HameoError, ValueError):
    """Argument outside the valid domain (off-surface point, t outside span, pole cap)."""


class ContractError(HameoError):
    """A precondition between objects is violated (span mismatch, missing inverse)."""


class NormalizationError(HameoError):
    pass


class IntegrationError(HameoError):
    """Trajectory left the disc although the generator is compactly supported."""


class ConvergenceError(HameoError):
    pass


class RangeError(HameoError, ValueError):
    pass


class EmptyFeasibleSetError(HameoError):
    pass
