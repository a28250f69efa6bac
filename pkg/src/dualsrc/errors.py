"""Exception types.  Every domain error carries a stable machine-readable ``code``."""


class DualSourcingError(ValueError):
    code = "DomainError"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.details = details

    def to_dict(self) -> dict:
        out = {"error": self.code, "message": str(self)}
        if self.details:
            out["details"] = self.details
        return out


class NegativeValue(DualSourcingError):
    code = "NegativeValue"


class OffLattice(DualSourcingError):
    code = "OffLattice"


class ProbSumMismatch(DualSourcingError):
    code = "ProbSumMismatch"


class ZeroVariance(DualSourcingError):
    code = "ZeroVariance"


class LeadTimeOrder(DualSourcingError):
    code = "LeadTimeOrder"


class InvalidInstance(DualSourcingError):
    code = "InvalidInstance"


class NonNegativeDrift(DualSourcingError):
    code = "NonNegativeDrift"


class GridTooNarrow(DualSourcingError):
    code = "GridTooNarrow"


class TruncationTooTight(DualSourcingError):
    code = "TruncationTooTight"


class NoConvergence(DualSourcingError):
    code = "NoConvergence"


class StateEscape(DualSourcingError):
    code = "StateEscape"
