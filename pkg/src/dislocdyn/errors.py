"""Exception hierarchy shared by all models."""
from __future__ import annotations


class DislocDynError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(DislocDynError, ValueError):
    """An input violates a documented precondition."""


class SingularPointError(DislocDynError, ValueError):
    """A kernel was evaluated at its singularity."""


class CollisionError(DislocDynError):
    """Two particles coincide (or would, after a step)."""

    def __init__(self, message: str, pair: tuple[int, int]):
        super().__init__(message)
        self.pair = pair


class StepSizeError(DislocDynError, ValueError):
    """The requested time step violates a stability restriction."""

    def __init__(self, message: str, admissible_dt: float):
        super().__init__(message)
        self.admissible_dt = admissible_dt


class InvalidStateError(DislocDynError, ValueError):
    """A state violates a model invariant (negative density, broken ordering, ...)."""


class DegenerateGradientError(DislocDynError):
    """kappa_y dropped below the positivity floor in the GCZ solver."""

    def __init__(self, message: str, index: int, value: float):
        super().__init__(message)
        self.index = index
        self.value = value


class TopologyError(DislocDynError):
    """A tracked curve self-intersects."""


class ConfigError(DislocDynError):
    """One or more configuration problems; ``errors`` lists every one of them."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)
