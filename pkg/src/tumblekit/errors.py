"""Exception types shared across the package."""


class OutOfDomainError(ValueError):
    """A position falls outside the kernel's cell partition."""


class BoundaryContaminationError(RuntimeError):
    """Signal could reach the window boundary before the final time."""


class DivergenceError(RuntimeError):
    """A solve or optimization produced non-finite values.

    ``last_good`` carries the most recent finite state when one exists.
    """

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class NumericalError(RuntimeError):
    """An iterative numerical procedure failed to converge."""


class DegenerateSpectrumError(RuntimeError):
    """Spectral step size is undefined: lambda_min is (near) zero.

    Callers must supply an override step size to continue.
    """

    def __init__(self, lambda_min, lambda_max):
        super().__init__(
            f"degenerate spectrum: lambda_min={lambda_min:.6e} "
            f"lambda_max={lambda_max:.6e}"
        )
        self.lambda_min = lambda_min
        self.lambda_max = lambda_max


class InfeasibleDesignError(RuntimeError):
    """No measurement time satisfies the design constraints."""


class ConfigError(ValueError):
    """An experiment configuration is missing or malformed."""
