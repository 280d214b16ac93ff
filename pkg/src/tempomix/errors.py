"""Exception hierarchy.

Every error carries a ``kind`` (the class name) so the CLI can emit a
machine-readable record.  ``ValidationError`` subclasses mean bad input
(exit code 2); everything else is a computation outcome (exit code 3).
"""


class TempomixError(Exception):
    exit_code = 3

    @property
    def kind(self) -> str:
        return type(self).__name__

    def to_record(self) -> dict:
        return {"error": self.kind, "message": str(self)}


class ValidationError(TempomixError, ValueError):
    exit_code = 2


class NotAperiodic(ValidationError):
    pass


class DepthMismatch(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class PreconditionUnmet(ValidationError):
    pass


class DegenerateSpectrum(TempomixError):
    pass


class NotStableEquivalent(TempomixError):
    pass


class NotUnstableEquivalent(TempomixError):
    pass


class InfeasibleTargets(TempomixError):
    pass


class WindowExhausted(TempomixError):
    pass


class RationalTerminated(TempomixError):
    def __init__(self, message: str, quotients=()):
        super().__init__(message)
        self.quotients = list(quotients)


class BoundViolated(TempomixError):
    def __init__(self, message: str, at=None):
        super().__init__(message)
        self.at = at


class NoWitness(TempomixError):
    pass


class NoPair(TempomixError):
    pass


class InsufficientSignal(TempomixError):
    pass


class LatticeRoof(TempomixError):
    pass
