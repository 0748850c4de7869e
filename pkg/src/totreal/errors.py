"""Exception taxonomy shared by all modules."""

from __future__ import annotations


class TotrealError(Exception):
    """Base class for all package-specific failures."""


class NearComplexPlane(TotrealError):
    """A frame is too close to spanning a complex subspace."""


class OutOfDomain(TotrealError):
    """A point lies outside the chart's domain of definition."""


class LeftDomain(TotrealError):
    """A geodesic or flow trajectory left the chart domain."""


class DerivativeOrderUnavailable(TotrealError):
    """A chart cannot supply derivatives of the requested order."""


class NoEinsteinConstant(TotrealError):
    """The chart declares no Einstein constant."""


class InvalidImmersion(TotrealError):
    """Grid map fails the totally-real or domain checks at some node."""


class SingularRicciOperator(TotrealError):
    """The pulled-back Ricci endomorphism is not invertible."""


class NotCritical(TotrealError):
    """An operation requiring a J-minimal base point got a non-critical one."""


class EigensolverFailure(TotrealError):
    """Dense symmetric eigensolve failed or lost symmetry."""


class NotExact(TotrealError):
    """A one-form expected to be exact has non-vanishing loop integrals."""


class NewtonDiverged(TotrealError):
    """Newton iteration exceeded its budget without meeting the tolerance."""


class SingularJacobian(TotrealError):
    """The linearised operator used as a Newton Jacobian is singular."""


class StepFailed(TotrealError):
    """A continuation step failed to certify; carries the parameter value."""

    def __init__(self, t: float, message: str = ""):
        self.t = t
        super().__init__(message or f"continuation step at t={t} failed")


class ContinuationStalled(TotrealError):
    """Step bisection hit the minimum step size without certifying."""


class DegenerateForm(TotrealError):
    """A two-form that must be nondegenerate is singular at some node."""


class ConfigError(TotrealError):
    """Scenario configuration is malformed; names the section and key."""

    def __init__(self, section: str, key: str | None, message: str):
        self.section = section
        self.key = key
        where = f"[{section}]" + (f" {key}" if key else "")
        super().__init__(f"{where}: {message}")


class TaskError(TotrealError):
    """A scenario task failed; carries enough context to reproduce."""
