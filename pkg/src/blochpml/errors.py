"""Exception types raised by the solver."""


class BlochPMLError(Exception):
    """Base class for all solver errors."""


class HalfIntegerWavenumber(BlochPMLError, ValueError):
    """k is (numerically) a half integer, so the two cutoff values merge."""


class DegenerateExponent(BlochPMLError, ArithmeticError):
    """h(alpha + j) == 1, so coth(-i beta sigma) has a pole. Perturb sigma."""


class InvalidDelta(BlochPMLError, ValueError):
    pass


class GeometryError(BlochPMLError, ValueError):
    pass


class InsufficientResolution(BlochPMLError, ValueError):
    """Requested Fourier modes alias on the top-vertex grid."""


class SupportViolation(BlochPMLError, ValueError):
    pass


class SingularSystem(BlochPMLError, ArithmeticError):
    def __init__(self, msg, alpha=None):
        super().__init__(msg)
        self.alpha = alpha


class ResidualTooLarge(BlochPMLError, ArithmeticError):
    def __init__(self, msg, alpha=None, residual=None):
        super().__init__(msg)
        self.alpha = alpha
        self.residual = residual


class PointOutsideCell(BlochPMLError, ValueError):
    pass


class MismatchedPoints(BlochPMLError, ValueError):
    pass


class CutoffMode(BlochPMLError, ValueError):
    """beta_j(alpha) vanishes; the flat modal problem has no outgoing solution."""


class TooFewPoints(BlochPMLError, ValueError):
    pass


class BoundViolated(BlochPMLError, AssertionError):
    pass


class ConfigError(BlochPMLError, ValueError):
    pass
