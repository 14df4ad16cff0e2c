"""Exception hierarchy shared by all panfem modules."""


class PanfemError(Exception):
    """Base class for every error raised by this package."""


class NonPositiveJacobian(PanfemError, ArithmeticError):
    """A deformation with det F <= 0 was encountered (element inversion)."""


class AsymmetricInput(PanfemError, ValueError):
    pass


class NegativeWeight(PanfemError, ValueError):
    pass


class RootFindFailure(PanfemError, RuntimeError):
    pass


class DivergedLoss(PanfemError, ArithmeticError):
    pass


class NewtonDiverged(PanfemError, RuntimeError):
    """Newton iteration hit its cap or produced a non-finite residual."""

    def __init__(self, message, history=None, step=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
        self.step = step


class SingularMatrix(NewtonDiverged):
    pass


class DegenerateFace(PanfemError, ValueError):
    pass


class DegenerateTimeStep(PanfemError, ValueError):
    pass


class ConfigInvalid(PanfemError, ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class SchemaMismatch(PanfemError, ValueError):
    pass


class NormalizationMismatch(PanfemError, ValueError):
    def __init__(self, field, stored, recomputed):
        super().__init__(
            f"{field} mismatch: stored {stored!r}, recomputed {recomputed!r}")
        self.field = field


class IoError(PanfemError, OSError):
    pass
