"""Exception types shared across the package."""

from __future__ import annotations

__all__ = [
    "SpectralKrotovError",
    "InvalidInputError",
    "IndefiniteKernelError",
    "SingularSystemError",
    "ConfigError",
    "PathwayError",
]


class SpectralKrotovError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(SpectralKrotovError, ValueError):
    """An argument violates a documented precondition."""


class IndefiniteKernelError(SpectralKrotovError, ValueError):
    """The constraint kernel is not positive semi-definite.

    Raised before any optimization step runs: a kernel whose frequency
    profile dips below zero destroys the guaranteed monotonic decrease of
    the total functional.  For well-separated frequency passes the bound is
    lambda_b <= 2 * lambda_a per pass; filters (lambda_b < 0) are always
    admissible.
    """


class SingularSystemError(SpectralKrotovError, RuntimeError):
    """The assembled Fredholm system matrix is singular or near-singular."""

    def __init__(self, gamma: float, detail: str = ""):
        self.gamma = gamma
        msg = f"Fredholm system matrix is numerically singular for gamma={gamma!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class ConfigError(SpectralKrotovError, ValueError):
    """A scenario config failed validation.

    Carries every problem found, not just the first; each message is
    prefixed with a path-like locator into the config document.
    """

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__(
            "invalid scenario config:\n" + "\n".join(f"  - {p}" for p in self.problems)
        )


class PathwayError(SpectralKrotovError, ValueError):
    """No usable dipole pathway connects the initial and target levels."""
