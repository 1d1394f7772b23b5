"""Exception types shared across the package."""


class ConvlawError(Exception):
    """Base class for all package-specific failures."""


class ResolutionError(ConvlawError, ValueError):
    """A kernel or mollifier is too narrow for the grid spacing."""


class GridCompatibilityError(ConvlawError, ValueError):
    """Two objects live on incompatible grids or time grids."""


class StepSizeError(ConvlawError, RuntimeError):
    """A flow integration step destroyed Jacobian positivity or monotonicity."""


class SupportError(ConvlawError, ValueError):
    """A compactly supported object touches or leaves the computational domain."""


class ConfigurationError(ConvlawError, ValueError):
    """An experiment configuration is invalid; carries every violation found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid configuration")
