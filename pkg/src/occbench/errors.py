"""Exception types raised across occbench."""

from __future__ import annotations


class OccBenchError(Exception):
    """Base class for every error raised by this package."""

    code = "error"

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


# -- ingestion --------------------------------------------------------------


class SchemaError(OccBenchError, ValueError):
    pass


class ValidationError(OccBenchError, ValueError):
    """An invariant is violated; carries the location of the first offender."""

    def __init__(self, message, video_id=None, tube_id=None, frame_index=None):
        self.video_id = video_id
        self.tube_id = tube_id
        self.frame_index = frame_index
        loc = [
            f"{k}={v}"
            for k, v in (("video", video_id), ("tube", tube_id), ("frame", frame_index))
            if v is not None
        ]
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)

    def to_dict(self) -> dict:
        d = super().to_dict()
        d.update(video_id=self.video_id, tube_id=self.tube_id, frame_index=self.frame_index)
        return d


class UnknownVideo(OccBenchError, LookupError):
    pass


class UnknownClass(OccBenchError, LookupError):
    pass


class ScoreOutOfRange(OccBenchError, ValueError):
    pass


# -- geometry ----------------------------------------------------------------


class EmptyTube(OccBenchError, ValueError):
    pass


class EmptyRegion(OccBenchError, ValueError):
    pass


class OutOfCalibratedRange(OccBenchError, ValueError):
    pass


# -- occluders ---------------------------------------------------------------


class DecodeError(OccBenchError, ValueError):
    pass


class EmptySprite(OccBenchError, ValueError):
    pass


class UnknownCategory(OccBenchError, ValueError):
    pass


class Unfittable(OccBenchError, ValueError):
    pass


# -- planning / rendering ------------------------------------------------------


class SeverityUnreachable(OccBenchError, RuntimeError):
    pass


class MotionSplitViolation(OccBenchError, ValueError):
    pass


class DimensionMismatch(OccBenchError, ValueError):
    pass


class MissingSprite(OccBenchError, LookupError):
    pass


class IndivisibleDims(OccBenchError, ValueError):
    pass


class ProbabilityOutOfRange(OccBenchError, ValueError):
    pass


class LengthMismatch(OccBenchError, ValueError):
    pass


# -- metrics -----------------------------------------------------------------


class NoGroundTruth(OccBenchError, ValueError):
    pass


class ZeroCleanBaseline(OccBenchError, ZeroDivisionError):
    pass


class ZeroDenominator(OccBenchError, ZeroDivisionError):
    pass


class MismatchedThresholds(OccBenchError, ValueError):
    pass
