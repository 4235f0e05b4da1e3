"""Exception hierarchy shared by the tracking pipeline."""

from __future__ import annotations


class MocapError(Exception):
    """Base class for all pipeline errors."""


class BehindCameraError(MocapError):
    pass


class TooManyFeaturesError(MocapError):
    pass


class DegenerateFitError(MocapError):
    pass


class AmbiguousCorrespondenceError(MocapError):
    pass


class TriangulationError(MocapError):
    pass


class DivergenceError(TriangulationError):
    pass


class IllConditionedError(TriangulationError):
    pass


class GeometryAmbiguityError(MocapError):
    pass


class DegenerateGeometryError(MocapError):
    pass


class WrongCountError(MocapError):
    pass


class NoOverlapError(MocapError):
    pass


class TrackingError(MocapError):
    """A per-frame pipeline failure tagged with the stage that raised it.

    ``stage`` is one of ``detection``, ``correspondence``, ``triangulation``,
    ``geometry`` or ``registration``; ``cause`` holds the original error.
    """

    STAGES = ("detection", "correspondence", "triangulation", "geometry", "registration")

    def __init__(self, stage: str, cause: Exception):
        if stage not in self.STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
