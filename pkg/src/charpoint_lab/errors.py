"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class CharpointError(Exception):
    """Base class for all errors raised by charpoint_lab."""


class ParseError(CharpointError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class DomainError(CharpointError):
    """An evaluation left the domain of a builtin (log, sqrt, division...)."""

    def __init__(self, message: str, offset: int | None = None):
        where = "" if offset is None else f" (expression offset {offset})"
        super().__init__(message + where)
        self.offset = offset


class QuadratureToleranceError(CharpointError):
    pass


class JetOrderError(CharpointError):
    pass


class CharacteristicPointError(CharpointError):
    """Mean curvature requested where the horizontal gradient vanishes."""


class SubmersionError(CharpointError):
    pass


class FrameError(CharpointError):
    pass


class NotCharacteristic(CharpointError):
    pass


class NotDegenerate(CharpointError):
    pass


class ZeroHessian(CharpointError):
    pass


class NormalFormResidual(CharpointError):
    pass


class NewtonDivergence(CharpointError):
    pass


class CurveLeavesWindow(CharpointError):
    pass


class NonIsolatedCharacteristicSet(CharpointError):
    pass


class OrderAmbiguous(CharpointError):
    pass


class NonFiniteIntegrand(CharpointError):
    pass


class JacobianDegenerate(CharpointError):
    pass


class NotMild(CharpointError):
    pass


class NoDegeneratePoint(CharpointError):
    pass


class ConfigError(CharpointError):
    pass


class WindowBoundaryWarning(UserWarning):
    pass
