"""Exception hierarchy.

Every error carries a short machine-readable ``code`` and the process exit
status the CLI maps it to (1 = validation, 2 = convergence, 3 = verification).
"""

from __future__ import annotations


class W1PlusError(Exception):
    code = "error"
    exit_code = 1

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict:
        out = {"error": self.code, "message": str(self)}
        out.update({k: _jsonable(v) for k, v in self.details.items()})
        return out


def _jsonable(v):
    if isinstance(v, (str, int, float, bool)) or v is None:
        return v
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return str(v)


class ValidationError(W1PlusError):
    code = "validation"


class DocumentError(ValidationError):
    code = "bad_document"


class DuplicateVertex(ValidationError):
    code = "duplicate_vertex"


class DanglingEdge(ValidationError):
    code = "dangling_edge"


class DuplicateEdge(ValidationError):
    code = "duplicate_edge"


class SelfLoop(ValidationError):
    code = "self_loop"


class DisconnectedGraph(ValidationError):
    code = "disconnected"


class InvalidMeasure(ValidationError):
    code = "invalid_measure"


class InfeasibleCoupling(ValidationError):
    code = "infeasible_coupling"


class TooManyGeodesics(W1PlusError):
    code = "too_many_geodesics"

    def __init__(self, message: str, count: int):
        super().__init__(message, count=count)
        self.count = count


class OrientationConflict(W1PlusError):
    code = "orientation_conflict"


class NotSpanning(W1PlusError):
    code = "not_spanning"


class DivergenceViolation(ValidationError):
    code = "divergence_violation"

    def __init__(self, message: str, vertex, residual: float):
        super().__init__(message, vertex=vertex, residual=residual)
        self.vertex = vertex
        self.residual = residual


class NotComparable(W1PlusError):
    code = "not_comparable"


class EmptyFace(W1PlusError):
    code = "empty_face"


class SupportViolation(W1PlusError):
    code = "support_violation"


class NoConvergence(W1PlusError):
    code = "no_convergence"
    exit_code = 2

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message, residual=residual, iterations=iterations)
        self.residual = residual
        self.iterations = iterations


class ZeroDensity(W1PlusError):
    code = "zero_density"


class PerturbationInfeasible(W1PlusError):
    code = "perturbation_infeasible"


class VerificationFailed(W1PlusError):
    code = "verification_failed"
    exit_code = 3
