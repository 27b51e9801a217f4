class CoarseBoundError(Exception):
    """Base error; `contract` names the violated contract in words."""

    contract = "coarsebound"

    def __init__(self, message: str, contract: str | None = None):
        super().__init__(message)
        if contract is not None:
            self.contract = contract


# Usage errors (exit 1)

class SpaceSpecError(CoarseBoundError, ValueError):
    contract = "space mini-language"


class GrowthSpecError(CoarseBoundError, ValueError):
    contract = "growth function: f(0)=1, non-decreasing"


class ChainFormatError(CoarseBoundError, ValueError):
    contract = "chain dump format"


class CapabilityError(CoarseBoundError):
    contract = "geodesic oracle capability"


class PointOutsideBallError(CoarseBoundError, ValueError):
    contract = "support inside the ball"


class NotOnLineError(CoarseBoundError, ValueError):
    contract = "point lies on the geodesic line"


class UnmappedPointError(CoarseBoundError, KeyError):
    contract = "pushforward map defined on the support"

    def __str__(self) -> str:
        return self.args[0]


class NeighborhoodEscapeError(CoarseBoundError, ValueError):
    contract = "1-neighborhood of the set inside the ball"


class BallSizeError(CoarseBoundError):
    contract = "ball size cap"

    def __init__(self, radius: int, size: int, cap: int):
        super().__init__(
            f"ball of radius {radius} exceeds the size cap ({size} > {cap}); "
            f"lower the radius or raise COARSEBOUND_BALL_CAP"
        )
        self.radius = radius
        self.size = size
        self.cap = cap


class SubsetScanCapError(CoarseBoundError):
    contract = "exact isodiametric scan cap"


# Validation failures (exit 2)

class ValidationFailure(CoarseBoundError):
    contract = "certificate validation"


class LowerBoundError(ValidationFailure):
    contract = "boundary bounded below on the interior"

    def __init__(self, message: str, point: bytes | None = None):
        super().__init__(message)
        self.point = point


class TransferError(ValidationFailure):
    contract = "boundary of the transferred chain equals 1/f"


class AuditError(ValidationFailure):
    contract = "cut witness strictly violates the isoperimetric inequality"


class ScaleResolutionError(ValidationFailure):
    contract = "integral flow resolves the cut at this scale"


class FlowOverflowError(ValidationFailure):
    contract = "scaled capacities fit 64-bit integers"


class SearchDivergenceError(ValidationFailure):
    contract = "bracketing search terminates"


class ConvergenceError(ValidationFailure):
    contract = "eigensolver residual"

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class MonotonicityError(ValidationFailure):
    contract = "K_R non-decreasing in R"
