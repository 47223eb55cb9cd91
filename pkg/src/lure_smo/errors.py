"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Matrix/vector shapes do not fit together."""


class SingularityError(ArithmeticError):
    """A matrix that must be invertible is (numerically) singular."""


class ParameterError(ValueError):
    """A model parameter is outside its admissible range."""


class NonConvergenceError(RuntimeError):
    """An iterative solver failed to converge."""


class DivergenceError(RuntimeError):
    """A simulated state became non-finite."""

    def __init__(self, step, t):
        self.step = step
        self.t = t
        super().__init__(f"non-finite state at step {step} (t = {t:.6g})")


class ConfigError(ValueError):
    """A scenario file could not be parsed or validated."""
