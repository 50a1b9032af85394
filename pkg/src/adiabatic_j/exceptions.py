"""Exception hierarchy shared by all solver modules."""


class AdiabaticError(Exception):
    """Base class for errors raised by this package."""


class NonZeroMean(AdiabaticError, ValueError):
    """A right-hand side that must integrate to zero does not."""

    def __init__(self, mean, tol):
        self.mean = mean
        self.tol = tol
        super().__init__(f"source term has mean {mean:.3e} (tolerance {tol:.1e})")


class NonZeroFiberMean(NonZeroMean):
    """A fiberwise right-hand side has nonzero fiber averages."""

    def __init__(self, mean, tol):
        super().__init__(mean, tol)
        self.args = (f"fiber means up to {mean:.3e} (tolerance {tol:.1e})",)


class NotPositive(AdiabaticError, ValueError):
    """A form required to be positive definite is not."""

    def __init__(self, margin, location=None, what="form"):
        self.margin = margin
        self.location = location
        msg = f"{what} not positive: minimum eigenvalue {margin:.3e}"
        if location is not None:
            msg += f" at grid index {tuple(int(i) for i in location)}"
        super().__init__(msg)


class NotRelativelyKahler(NotPositive):
    """The vertical block of a form is not positive on some fiber."""

    def __init__(self, margin, location=None):
        super().__init__(margin, location, what="vertical block")


class NoConvergence(AdiabaticError, RuntimeError):
    """An iterative method stopped before reaching its tolerance."""

    def __init__(self, message, residual=None, report=None):
        self.residual = residual
        self.report = report
        super().__init__(message)


class PositivityBreakdown(NoConvergence):
    """Newton damping could not keep the metric positive."""


class GridMismatch(AdiabaticError, ValueError):
    """Operands live on different grids or truncation orders."""


class SingularLeadingBlock(AdiabaticError, ValueError):
    """The regularized metric is singular at infinite k."""


class OrderTooHigh(AdiabaticError, RuntimeError):
    """The order-r metric is not positive for any tested k."""

    def __init__(self, message, margins=None):
        self.margins = margins
        super().__init__(message)


class ConfigError(AdiabaticError, ValueError):
    """Invalid experiment configuration."""


class NotNormalized(AdiabaticError, ValueError):
    """Input data fail the fiberwise or base normalization check."""

    def __init__(self, what, deviation, tol):
        self.deviation = deviation
        self.tol = tol
        super().__init__(f"{what}: deviation {deviation:.3e} exceeds {tol:.1e}")
