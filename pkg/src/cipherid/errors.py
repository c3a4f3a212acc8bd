"""Exception hierarchy shared across the package."""


class CipherIdError(Exception):
    """Base class for all errors raised by cipherid."""


class DepthExhausted(CipherIdError):
    """A multiplication was requested on a ciphertext with no level left."""


class DimensionMismatch(CipherIdError, ValueError):
    pass


class InsufficientData(CipherIdError, ValueError):
    """Too few I/O samples for the requested model structure."""


class DegenerateData(CipherIdError, ValueError):
    """All I/O samples are zero, so beta (and 1/beta^2) is undefined."""


class RankDeficient(CipherIdError, ValueError):
    """The regressor matrix does not have full column rank."""


class PreconditionViolated(CipherIdError, ValueError):
    pass


class Infeasible(CipherIdError):
    """No parameter on the search grid satisfies the requested constraints."""


class DiagnosticsNotAllowed(CipherIdError):
    """Intermediate decryption requested without a debug key."""


class MissingRun(CipherIdError, FileNotFoundError):
    pass
