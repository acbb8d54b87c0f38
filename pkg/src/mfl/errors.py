"""Exception types shared across the package."""


class MflError(Exception):
    """Base class for package-specific failures."""


class DivergedError(MflError):
    """A particle run produced a non-finite gradient or left the guard box."""

    def __init__(self, step: int, particle: int, message: str = ""):
        self.step = step
        self.particle = particle
        super().__init__(
            message or f"run diverged at step {step}, particle {particle}"
        )


class FixedPointError(MflError):
    """Damped Gibbs iteration did not reach the residual tolerance."""

    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"fixed-point iteration stopped after {iterations} iterations "
            f"with L1 residual {residual:.3e}"
        )


class ConfigError(MflError):
    """Experiment configuration failed parsing or validation."""
