"""Exception hierarchy shared by all modules."""


class ThetaMMError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(ThetaMMError, ValueError):
    pass


# contour
class DivergentPath(ThetaMMError):
    pass


class QuadratureNotConverged(ThetaMMError):
    pass


# oracle
class DeterminantUnderflow(ThetaMMError):
    def __init__(self, msg, log_abs=None):
        super().__init__(msg)
        self.log_abs = log_abs


class ExtractionAliasing(ThetaMMError):
    pass


# spectral curve
class NewtonDiverged(ThetaMMError):
    pass


class DegenerateCurve(ThetaMMError):
    pass


class IllConditionedPeriods(ThetaMMError):
    pass


class LeftCell(ThetaMMError):
    pass


# invariants
class CellBoundary(ThetaMMError):
    pass


class StepTooLarge(ThetaMMError):
    pass


class FitIllConditioned(ThetaMMError):
    pass


class MissingEntry(ThetaMMError):
    pass


class AsymmetricTensor(ThetaMMError):
    pass


# theta / expansion / resummation
class IndefiniteQuadraticForm(ThetaMMError):
    pass


class RadiusOverflow(ThetaMMError):
    pass


class TableIncomplete(ThetaMMError):
    pass


class ThetaDerivativeVanishing(ThetaMMError):
    def __init__(self, msg, order=None, value=None):
        super().__init__(msg)
        self.order = order
        self.value = value


# holomorphic anomaly
class SingularKappa(ThetaMMError):
    pass
