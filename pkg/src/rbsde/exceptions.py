"""Exception hierarchy shared by the solver, analysis and CLI layers."""


class RBSDEError(Exception):
    """Base class for every error raised by this package."""


class InvalidSpecError(RBSDEError, ValueError):
    """A lattice, instance or scenario was built from invalid parameters."""


class ParameterError(InvalidSpecError):
    """Numerical parameters lead to a degenerate model (e.g. probability outside [0, 1])."""


class ShapeError(RBSDEError, ValueError):
    """A layer or node field does not have the lattice-implied shape."""


class ConfigurationError(RBSDEError, ValueError):
    """A required component (barrier, hypothesis constants, seed) is missing."""


class PreconditionError(RBSDEError, ValueError):
    """An operation precondition does not hold for the supplied data."""


class ModeError(PreconditionError):
    """Requested path-estimation mode is not available for this lattice size."""


class NoRootError(RBSDEError, ArithmeticError):
    """The implicit one-step equation could not be bracketed."""


class DriverEvaluationError(RBSDEError, ArithmeticError):
    """The generator returned a non-finite value on finite input."""
