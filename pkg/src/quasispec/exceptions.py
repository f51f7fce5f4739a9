"""Exception types raised by the quasispec solvers."""


class QuasispecError(Exception):
    """Base class for all quasispec errors."""


class UnsupportedOrderError(QuasispecError):
    """Differential order outside {3, 4, 5}."""


class ValidationError(QuasispecError):
    """Structurally invalid input (coefficient set, boundary spec, file schema)."""


class IntegrationError(QuasispecError):
    """Propagation of the first-order system failed.

    Carries ``x`` (approximate failing abscissa) and ``mesh`` (last mesh size
    tried) when known.
    """

    def __init__(self, message, x=None, mesh=None):
        super().__init__(message)
        self.x = x
        self.mesh = mesh


class NearPoleError(QuasispecError):
    """A Weyl-matrix evaluation was requested too close to a pole.

    ``k`` names the column whose characteristic function is below the floor;
    its poles are the zeros of that function.
    """

    def __init__(self, message, k, lam):
        super().__init__(message)
        self.k = k
        self.lam = lam


class BoundaryZeroError(QuasispecError):
    """A zero is suspected on (or too close to) a counting contour."""


class CountMismatchError(QuasispecError):
    """Sum of located multiplicities disagrees with the contour count."""


class NonConvergenceError(QuasispecError):
    """An iterative procedure (phase refinement, quadrature, Newton) stalled."""
