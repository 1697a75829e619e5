"""Exception types shared across the package."""


class RobPCAError(Exception):
    """Base class for errors raised by robpca."""


class ValidationError(RobPCAError, ValueError):
    """Invalid input: bad shapes, out-of-range parameters, malformed files."""


class NumericalError(RobPCAError, ArithmeticError):
    """A numerical routine could not produce a trustworthy result."""
