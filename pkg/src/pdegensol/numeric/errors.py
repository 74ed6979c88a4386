"""Typed evaluation failures.

Batched evaluation records failures as NaN poison plus a cause; the
single-point API turns the first recorded cause into one of these."""


class EvalError(Exception):
    """Base class for numeric evaluation failures."""


class DomainError(EvalError):
    """Log/sqrt/power domain violation, guarded division, or a tan pole."""


class QuadratureNonconvergence(EvalError):
    """Adaptive quadrature hit its depth limit before reaching tolerance."""


class RootNotFound(EvalError):
    """Bracketing or polishing failed to locate a root to tolerance."""


class DegenerateRoot(EvalError):
    """The implicit-function derivative dPhi/dz vanished at the root."""


class NestLimitExceeded(EvalError):
    """Quadrature nesting exceeded the configured structural limit."""


class SamplingExhausted(EvalError):
    """Scenario sampling could not satisfy constraints and guards."""
