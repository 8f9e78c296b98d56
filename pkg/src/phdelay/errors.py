"""Exception hierarchy shared by all phdelay modules."""


class PHDelayError(Exception):
    """Base class for all library errors."""


class StructuralError(PHDelayError, ValueError):
    """Operator blocks have inconsistent dimensions."""


class InvalidNodeError(PHDelayError, ValueError):
    """Node data violates a standing assumption (non-PD weight, non-unitary psi, ...)."""


class NoBetaError(PHDelayError):
    """No admissible beta with Re beta > 0 was found."""


class BadBetaError(PHDelayError):
    """beta*I + psi*D is singular for the requested beta."""


class StepFailure(PHDelayError):
    """The implicit midpoint step matrix could not be inverted."""

    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class ResolventFailure(PHDelayError):
    """The boundary equation of the resolvent problem is singular."""


class CoercivityError(PHDelayError, ValueError):
    """A Hamiltonian weight lost coercivity on the simulation horizon."""


class AuditFailure(PHDelayError):
    """A power or consistency audit was violated."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConfigError(PHDelayError):
    """Scenario file could not be parsed."""


class ValidationError(PHDelayError, ValueError):
    """Scenario file parsed but describes an invalid scenario."""
