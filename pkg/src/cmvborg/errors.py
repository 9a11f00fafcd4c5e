"""Exception hierarchy shared by all modules."""

import numpy as np

__all__ = ['CMVError', 'ArgumentError', 'NumericalError', 'NotHermitian',
           'NotPSD', 'NotUnitary', 'SpectrumNotInRightHalfPlane',
           'ContractivityViolated', 'InvalidArc', 'InvalidRange',
           'DimensionMismatch', 'NearUnitCircle', 'TooCloseToBoundary',
           'ConfigError', 'EigenFailure', 'SolveFailure', 'SingularPivot',
           'PivotSingular', 'CayleySingular', 'WronskianSingular',
           'TransferSingular', 'NonInvertible', 'NoConvergence',
           'ScheduleTooCoarse', 'LogDomainViolation']


class CMVError(Exception):
    """Base class for errors raised by :mod:`cmvborg`."""


class ArgumentError(CMVError, ValueError):
    """Raised when an input violates a documented precondition."""


class NumericalError(CMVError, np.linalg.LinAlgError):
    """Raised when a computation cannot produce a trustworthy result."""


class NotHermitian(ArgumentError):
    pass


class NotPSD(ArgumentError):
    pass


class NotUnitary(ArgumentError):
    pass


class SpectrumNotInRightHalfPlane(ArgumentError):
    pass


class ContractivityViolated(ArgumentError):
    """Raised when a Verblunsky coefficient is not a strict contraction."""

    def __init__(self, msg, site=None):
        super().__init__(msg)
        self.site = site


class InvalidArc(ArgumentError):
    pass


class InvalidRange(ArgumentError):
    pass


class DimensionMismatch(ArgumentError):
    pass


class NearUnitCircle(ArgumentError):
    pass


class TooCloseToBoundary(ArgumentError):
    pass


class ConfigError(ArgumentError):
    pass


class EigenFailure(NumericalError):
    pass


class SolveFailure(NumericalError):
    pass


class SingularPivot(NumericalError):
    """A matrix that has to be inverted is (numerically) singular."""


# The names below are the ones used at the individual call sites.
PivotSingular = SingularPivot
CayleySingular = SingularPivot
WronskianSingular = SingularPivot
TransferSingular = SingularPivot
NonInvertible = SingularPivot


class NoConvergence(NumericalError):
    def __init__(self, msg, residual=None, depth=None):
        super().__init__(msg)
        self.residual = residual
        self.depth = depth


class ScheduleTooCoarse(NumericalError):
    def __init__(self, msg, defect=None):
        super().__init__(msg)
        self.defect = defect


class LogDomainViolation(NumericalError):
    def __init__(self, msg, indices=()):
        super().__init__(msg)
        self.indices = list(indices)
