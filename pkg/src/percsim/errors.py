"""Exception types raised across the package."""


class PercsimError(Exception):
    """Base class for package errors."""


class CapExceededError(PercsimError, ValueError):
    """A sampler would exceed the configured hard size cap."""


class DegenerateInputError(PercsimError, ValueError):
    """Geometric input is degenerate (for example all nuclei collinear)."""


class DivergenceError(PercsimError, ValueError):
    """An integral, moment or lattice sum required to be finite diverges."""


class QuadratureError(PercsimError, RuntimeError):
    """Adaptive quadrature failed to reach the requested accuracy.

    Attributes
    ----------
    achieved : float
        Relative error estimate reached before giving up.
    """

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved relative error {achieved:.3g})")
        self.achieved = achieved


class UnreachableError(PercsimError, ValueError):
    """A signal level lies below what a compactly supported path loss attains."""


class InfeasibleError(PercsimError, ValueError):
    """Parameter ordering required by a closed-form bound is violated."""


class BracketError(PercsimError, ValueError):
    """Crossing probabilities at the bracket ends do not straddle the target."""
