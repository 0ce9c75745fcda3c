"""Exception and warning types shared across the package."""


class ModelError(Exception):
    """Base class for all semicap errors."""


class InvalidParameterError(ModelError, ValueError):
    """An input violates a documented precondition (non-finite, wrong sign, out of range)."""


class DepletionAssumptionError(ModelError):
    """No equilibrium with non-negative band bending exists for the given bias.

    Signals accumulation or inverted bias, which the constant-depletion-charge
    model does not cover.
    """


class ConvergenceError(ModelError):
    """An iterative solver exhausted its iteration budget.

    Attributes
    ----------
    bracket : tuple or None
        Last root bracket, when raised by the scalar solver.
    best : object or None
        Best solution found so far, when raised by the least-squares fitter.
    """

    def __init__(self, message, *, bracket=None, best=None):
        super().__init__(message)
        self.bracket = bracket
        self.best = best


class FlatBandError(ModelError):
    """Band bending is at (or numerically indistinguishable from) zero.

    The bulk space-charge capacitance diverges there, so the breakdown is
    reported as an error instead of an infinity.
    """


class ThroughContactError(ModelError):
    """Requested stage position lies behind the electrical-contact position."""


class PFAInvalidError(ModelError):
    """Gap is not small compared to the sphere radius; the proximity-force
    capacitance form does not apply."""


class UnphysicalGapError(ModelError):
    """Distance correction would produce a non-positive true gap."""


class ParseError(ModelError, ValueError):
    """Malformed input file. Carries the 1-based line number when known."""

    def __init__(self, message, *, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CorrectionSeriesError(ModelError):
    """One or more rows of a distance/force series could not be corrected.

    Attributes
    ----------
    row_errors : list of (int, Exception)
        Zero-based row indices with the error raised for each.
    """

    def __init__(self, row_errors):
        self.row_errors = list(row_errors)
        detail = "; ".join(f"row {i}: {exc}" for i, exc in self.row_errors)
        super().__init__(f"{len(self.row_errors)} row(s) failed: {detail}")


class LinearizationWarning(UserWarning):
    """First-order force correction used outside its small-offset regime."""
