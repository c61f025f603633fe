"""Exception hierarchy.

Every domain failure derives from :class:`ICError`; the CLI turns these into
exit code 1 with a JSON body carrying :attr:`ICError.kind`.
"""


class ICError(Exception):
    """Base class for domain errors."""

    kind = "ICError"

    def to_json(self):
        return {"error": self.kind, "message": str(self)}


class ModelSyntaxError(ICError):
    """Model file is not well-formed JSON or misses required fields."""

    kind = "ModelSyntaxError"

    def __init__(self, message, line=None, column=None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column

    def to_json(self):
        body = super().to_json()
        body.update(line=self.line, column=self.column)
        return body


class ModelError(ICError):
    """Model violates a structural invariant."""

    kind = "ModelError"

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = tuple(violations)


class SizeGuardExceeded(ICError):
    kind = "SizeGuardExceeded"


class ZeroConditioningEvent(ICError):
    kind = "ZeroConditioningEvent"


class ClassMismatch(ICError):
    kind = "ClassMismatch"


class SingularSystem(ICError):
    kind = "SingularSystem"


class BoundaryParameter(ICError):
    kind = "BoundaryParameter"


class InconsistentPrior(ICError):
    kind = "InconsistentPrior"


class InconsistentInput(ICError):
    """Observed quantities contradict an exact identity."""

    kind = "InconsistentInput"


class PreconditionViolated(ICError):
    kind = "PreconditionViolated"


class NoQualifyingTriple(ICError):
    kind = "NoQualifyingTriple"


class DegenerateDenominator(ICError):
    kind = "DegenerateDenominator"


class OutOfRange(ICError, ValueError):
    kind = "OutOfRange"


class UnassignedParent(ICError, KeyError):
    kind = "UnassignedParent"
