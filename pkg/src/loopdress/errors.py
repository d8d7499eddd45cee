"""Exception types shared across the package."""
from __future__ import annotations


class LoopDressError(Exception):
    """Base class for all package errors."""


class DegenerateBasis(LoopDressError):
    pass


class NotComplementary(LoopDressError):
    pass


class NullVector(LoopDressError):
    pass


class NotPolynomialInA(LoopDressError):
    pass


class GridTooCoarse(LoopDressError):
    pass


class GridMismatch(LoopDressError):
    pass


class UnknownFlow(LoopDressError):
    pass


class LambdaZeroAtMinusOneFlow(LoopDressError):
    pass


class IncompatibleReality(LoopDressError):
    pass


class SingularAtPoint(LoopDressError):
    pass


class PoleEvaluation(LoopDressError):
    pass


class StepSizeUnderflow(LoopDressError):
    pass


class NoDecayAtLeftEdge(LoopDressError):
    pass


class ZeroScale(LoopDressError):
    pass


class RealPole(LoopDressError):
    pass


class RankDeficientU(LoopDressError):
    pass


class FSingularAtPoint(LoopDressError):
    pass


class DegenerateAngle(LoopDressError):
    pass


class NoCommonPeriod(LoopDressError):
    pass


class CoincidentPoles(LoopDressError):
    pass


class EqualParameters(LoopDressError):
    pass


class F2VanishesAt(LoopDressError):
    pass


class BlowUpDetected(LoopDressError):
    pass


class XiCollision(LoopDressError):
    pass


class SingularB(LoopDressError):
    pass


class SingularBv(LoopDressError):
    pass


class SingularDifference(LoopDressError):
    pass


class ZeroK(LoopDressError):
    pass


class LastCoordinateVanishesAt(LoopDressError):
    pass


class ResonantPoles(LoopDressError):
    pass


class UnresolvedGrid(LoopDressError):
    pass


class UnknownExample(LoopDressError):
    pass


class MissingArtifacts(LoopDressError):
    pass


class ParseError(LoopDressError):
    """Malformed experiment file; ``line`` and ``col`` are 1-based when known."""

    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        self.msg = msg
        self.line = line
        self.col = col
        where = f"line {line}, column {col}: " if line is not None else ""
        super().__init__(where + msg)
