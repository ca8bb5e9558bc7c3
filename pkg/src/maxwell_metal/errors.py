"""Exception hierarchy shared by the numerical modules and the CLI."""


class MaxwellError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(MaxwellError, ValueError):
    """Invalid or inconsistent run configuration."""


class NumericalError(MaxwellError, ArithmeticError):
    """A numerical invariant was violated during a computation."""


class ConvergenceError(NumericalError):
    """Step-doubling self-check failed: the integrator is not converged."""


class PositivityError(NumericalError):
    """A density matrix lost positivity beyond tolerance."""


class DegeneracyError(MaxwellError, ValueError):
    """The requested manifold touches a band degeneracy."""


class ExportError(MaxwellError, OSError):
    """Writing an output file failed."""
