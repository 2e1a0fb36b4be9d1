"""Exception hierarchy.

Every error carries a ``category`` (its class name, used as the machine
readable tag on the command line) and an ``exit_code``:

* 2 -- configuration problems
* 3 -- physics-domain failures (instability, unreachable targets, ...)
* 4 -- numerical failures
"""

from __future__ import annotations


class FPJAError(Exception):
    exit_code = 4

    def __init__(self, message: str = "", *, stage: str | None = None):
        super().__init__(message)
        self.stage = stage

    @property
    def category(self) -> str:
        return type(self).__name__

    def __str__(self) -> str:
        msg = super().__str__()
        if self.stage:
            return f"[{self.stage}] {msg}"
        return msg


# -- configuration ----------------------------------------------------------

class ConfigError(FPJAError, ValueError):
    exit_code = 2


class ParseError(ConfigError):
    """Config text could not be parsed; message carries line/key context."""


class ValidationError(ConfigError):
    """One or more config invariants are violated."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


# -- physics domain ---------------------------------------------------------

class PhysicsError(FPJAError):
    exit_code = 3


class PoleReached(PhysicsError):
    """r >= 1: the gain formulas diverge."""


class AsymmetricConversion(PhysicsError, ValueError):
    """|beta_ab| != |beta_bc|, so s and r are not defined as scalars."""


class OutOfRegime(PhysicsError, ValueError):
    """Inputs lie outside the regime where the factored polynomial holds."""


class IsolationNotReached(PhysicsError):
    pass


class StabilityBoundViolated(PhysicsError):
    pass


class TargetUnreachable(PhysicsError):
    def __init__(self, message: str, *, ceiling_db: float | None = None,
                 stage: str | None = None):
        super().__init__(message, stage=stage)
        self.ceiling_db = ceiling_db


# -- numerical --------------------------------------------------------------

class NumericalError(FPJAError):
    exit_code = 4


class NearSingular(NumericalError):
    """Coupling matrix inversion is ill-conditioned (at/over an oscillation threshold)."""


class DegenerateLoop(NumericalError):
    """Loop determinant C vanishes; closed forms are undefined."""


class NonPhysical(NumericalError):
    """Output variance below the vacuum level for vacuum input."""


class InterpolationIllConditioned(NumericalError):
    pass


class NoMinimum(NumericalError):
    """Calibration objective is flat."""
