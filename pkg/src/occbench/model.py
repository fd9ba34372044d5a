"""Dataset manifests, action tubes and their JSON ingestion.

Boxes use half-open pixel coordinates ``[x_min, x_max) x [y_min, y_max)`` so
the area is ``(x_max - x_min) * (y_max - y_min)`` with no +1 correction.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import jsonschema

from .errors import (
    SchemaError,
    ScoreOutOfRange,
    UnknownClass,
    UnknownVideo,
    ValidationError,
)

__all__ = [
    "BoundingBox",
    "ActionTube",
    "VideoRecord",
    "DatasetManifest",
    "FrameDetection",
    "parse_manifest",
    "dump_manifest",
    "load_predictions",
    "dump_predictions",
    "load_frame_detections",
    "manifest_as_predictions",
]


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValidationError(f"non-finite box coordinate {coords}")
        if min(coords) < 0:
            raise ValidationError(f"negative box coordinate {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError(f"degenerate box {coords}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def as_list(self) -> List[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True)
class ActionTube:
    """Per-frame actor boxes sharing one class label.

    ``frames`` maps frame index to box and is kept sorted by index.  Gaps are
    allowed.  ``score`` is set for predictions and ``None`` for ground truth.
    """

    tube_id: str
    class_label: str
    frames: Dict[int, BoundingBox]
    score: Optional[float] = None

    def __post_init__(self):
        if not self.frames:
            raise ValidationError("tube has no frames", tube_id=self.tube_id)
        if list(self.frames) != sorted(self.frames):
            object.__setattr__(self, "frames", dict(sorted(self.frames.items())))
        if min(self.frames) < 0:
            raise ValidationError("negative frame index", tube_id=self.tube_id)
        if self.score is not None and not (0.0 <= self.score <= 1.0):
            raise ScoreOutOfRange(f"tube {self.tube_id!r} score {self.score} outside [0, 1]")

    @property
    def is_prediction(self) -> bool:
        return self.score is not None

    @property
    def frame_indices(self) -> Tuple[int, ...]:
        return tuple(self.frames)

    def boxes(self) -> Iterator[Tuple[int, BoundingBox]]:
        return iter(self.frames.items())


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    width: int
    height: int
    frame_count: int
    frame_source: str
    tubes: Tuple[ActionTube, ...] = ()

    def frame_path(self, index: int) -> str:
        """Format ``frame_source`` for one frame (``{frame}`` placeholder, e.g. ``{frame:05d}``)."""
        return self.frame_source.format(frame=index)


@dataclass(frozen=True)
class DatasetManifest:
    dataset_id: str
    class_list: Tuple[str, ...]
    videos: Tuple[VideoRecord, ...]
    _index: Dict[str, int] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {v.video_id: i for i, v in enumerate(self.videos)})

    def video(self, video_id: str) -> VideoRecord:
        try:
            return self.videos[self._index[video_id]]
        except KeyError:
            raise UnknownVideo(f"unknown video {video_id!r}") from None

    def __contains__(self, video_id: str) -> bool:
        return video_id in self._index

    @property
    def tube_count(self) -> int:
        return sum(len(v.tubes) for v in self.videos)


@dataclass(frozen=True)
class FrameDetection:
    """A native per-frame detection, used for frame-level mAP."""

    video_id: str
    frame_index: int
    class_label: str
    box: BoundingBox
    score: float


# -- schemas ------------------------------------------------------------------

_BOX = {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}
_FRAMES = {
    "type": "object",
    "patternProperties": {"^[0-9]+$": _BOX},
    "additionalProperties": False,
}
_GT_TUBE = {
    "type": "object",
    "properties": {"tube_id": {"type": "string"}, "class": {"type": "string"}, "frames": _FRAMES},
    "required": ["tube_id", "class", "frames"],
    "additionalProperties": False,
}
_PRED_TUBE = {
    "type": "object",
    "properties": {**_GT_TUBE["properties"], "score": {"type": "number"}},
    "required": ["tube_id", "class", "frames", "score"],
    "additionalProperties": False,
}
_VIDEO_FIELDS = {
    "video_id": {"type": "string"},
    "width": {"type": "integer"},
    "height": {"type": "integer"},
    "frame_count": {"type": "integer"},
    "frame_source": {"type": "string"},
}

MANIFEST_SCHEMA = {
    "type": "object",
    "properties": {
        "dataset_id": {"type": "string"},
        "class_list": {"type": "array", "items": {"type": "string"}},
        "videos": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {**_VIDEO_FIELDS, "tubes": {"type": "array", "items": _GT_TUBE}},
                "required": ["video_id", "width", "height", "frame_count", "frame_source", "tubes"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["dataset_id", "class_list", "videos"],
    "additionalProperties": False,
}

# Same layout as the manifest plus a per-tube score; the video geometry fields
# and class_list may be carried along but are not required.
PREDICTION_SCHEMA = {
    "type": "object",
    "properties": {
        "dataset_id": {"type": "string"},
        "class_list": {"type": "array", "items": {"type": "string"}},
        "videos": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {**_VIDEO_FIELDS, "tubes": {"type": "array", "items": _PRED_TUBE}},
                "required": ["video_id", "tubes"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["videos"],
    "additionalProperties": False,
}

FRAME_DETECTION_SCHEMA = {
    "type": "object",
    "properties": {
        "dataset_id": {"type": "string"},
        "detections": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "video_id": {"type": "string"},
                    "frame": {"type": "integer", "minimum": 0},
                    "class": {"type": "string"},
                    "box": _BOX,
                    "score": {"type": "number"},
                },
                "required": ["video_id", "frame", "class", "box", "score"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["detections"],
    "additionalProperties": False,
}


def _reject_duplicate_keys(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise SchemaError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _load_json(document, schema) -> dict:
    if isinstance(document, (bytes, bytearray)):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError(f"document is not UTF-8: {exc}") from None
    try:
        doc = json.loads(document, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}") from None
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{where}: {exc.message}") from None
    return doc


def _build_tube(raw: dict, video_id: str, with_score: bool) -> ActionTube:
    tube_id = raw["tube_id"]
    frames = {}
    for key, coords in raw["frames"].items():
        idx = int(key)
        if idx in frames:
            raise ValidationError("duplicate frame index", video_id, tube_id, idx)
        try:
            frames[idx] = BoundingBox(*(float(c) for c in coords))
        except ValidationError as exc:
            raise ValidationError(str(exc), video_id, tube_id, idx) from None
    if not frames:
        raise ValidationError("tube has no frames", video_id, tube_id)
    score = float(raw["score"]) if with_score else None
    if score is not None and not (0.0 <= score <= 1.0):
        raise ScoreOutOfRange(f"video {video_id!r} tube {tube_id!r}: score {score} outside [0, 1]")
    return ActionTube(tube_id, raw["class"], dict(sorted(frames.items())), score)


def parse_manifest(document) -> DatasetManifest:
    """Parse and fully validate a dataset manifest (JSON bytes or text)."""
    doc = _load_json(document, MANIFEST_SCHEMA)
    classes = tuple(doc["class_list"])
    if len(set(classes)) != len(classes):
        raise ValidationError("duplicate entries in class_list")
    known = set(classes)
    seen_videos = set()
    videos = []
    for rv in doc["videos"]:
        vid = rv["video_id"]
        if vid in seen_videos:
            raise ValidationError("duplicate video_id", video_id=vid)
        seen_videos.add(vid)
        w, h, n = int(rv["width"]), int(rv["height"]), int(rv["frame_count"])
        for name, value in (("width", w), ("height", h), ("frame_count", n)):
            if value <= 0:
                raise ValidationError(f"{name} must be positive, got {value}", video_id=vid)
        tubes = []
        seen_tubes = set()
        for rt in rv["tubes"]:
            tube = _build_tube(rt, vid, with_score=False)
            if tube.tube_id in seen_tubes:
                raise ValidationError("duplicate tube_id", vid, tube.tube_id)
            seen_tubes.add(tube.tube_id)
            if tube.class_label not in known:
                raise ValidationError(f"class {tube.class_label!r} not in class_list", vid, tube.tube_id)
            for idx, box in tube.boxes():
                if idx >= n:
                    raise ValidationError(f"frame index beyond frame_count {n}", vid, tube.tube_id, idx)
                if box.x_max > w or box.y_max > h:
                    raise ValidationError(f"box {box.as_list()} exceeds {w}x{h} frame", vid, tube.tube_id, idx)
            tubes.append(tube)
        videos.append(VideoRecord(vid, w, h, n, rv["frame_source"], tuple(tubes)))
    return DatasetManifest(doc["dataset_id"], classes, tuple(videos))


def _tube_to_json(tube: ActionTube) -> dict:
    out = {
        "tube_id": tube.tube_id,
        "class": tube.class_label,
        "frames": {str(i): b.as_list() for i, b in tube.boxes()},
    }
    if tube.score is not None:
        out["score"] = tube.score
    return out


def manifest_to_json(manifest: DatasetManifest) -> dict:
    return {
        "dataset_id": manifest.dataset_id,
        "class_list": list(manifest.class_list),
        "videos": [
            {
                "video_id": v.video_id,
                "width": v.width,
                "height": v.height,
                "frame_count": v.frame_count,
                "frame_source": v.frame_source,
                "tubes": [_tube_to_json(t) for t in v.tubes],
            }
            for v in manifest.videos
        ],
    }


def dump_manifest(manifest: DatasetManifest) -> bytes:
    return json.dumps(manifest_to_json(manifest), indent=2).encode("utf-8")


def load_predictions(document, manifest: DatasetManifest) -> Dict[str, List[ActionTube]]:
    """Parse prediction tubes and group them by video id (document order kept)."""
    doc = _load_json(document, PREDICTION_SCHEMA)
    known = set(manifest.class_list)
    grouped: Dict[str, List[ActionTube]] = defaultdict(list)
    for rv in doc["videos"]:
        vid = rv["video_id"]
        if vid not in manifest:
            raise UnknownVideo(f"prediction references unknown video {vid!r}")
        for rt in rv["tubes"]:
            tube = _build_tube(rt, vid, with_score=True)
            if tube.class_label not in known:
                raise UnknownClass(f"video {vid!r} tube {tube.tube_id!r}: unknown class {tube.class_label!r}")
            grouped[vid].append(tube)
    return dict(grouped)


def dump_predictions(predictions: Mapping[str, Sequence[ActionTube]], dataset_id: str = "") -> bytes:
    doc = {
        "dataset_id": dataset_id,
        "videos": [{"video_id": vid, "tubes": [_tube_to_json(t) for t in tubes]} for vid, tubes in predictions.items()],
    }
    return json.dumps(doc, indent=2).encode("utf-8")


def manifest_as_predictions(manifest: DatasetManifest, score: float = 1.0) -> Dict[str, List[ActionTube]]:
    """Turn ground truth into perfect predictions (useful for smoke tests)."""
    return {
        v.video_id: [ActionTube(t.tube_id, t.class_label, dict(t.frames), score) for t in v.tubes]
        for v in manifest.videos
        if v.tubes
    }


def load_frame_detections(document, manifest: DatasetManifest) -> List[FrameDetection]:
    doc = _load_json(document, FRAME_DETECTION_SCHEMA)
    known = set(manifest.class_list)
    out = []
    for i, rd in enumerate(doc["detections"]):
        vid = rd["video_id"]
        if vid not in manifest:
            raise UnknownVideo(f"detection {i} references unknown video {vid!r}")
        if rd["class"] not in known:
            raise UnknownClass(f"detection {i}: unknown class {rd['class']!r}")
        score = float(rd["score"])
        if not 0.0 <= score <= 1.0:
            raise ScoreOutOfRange(f"detection {i}: score {score} outside [0, 1]")
        try:
            box = BoundingBox(*(float(c) for c in rd["box"]))
        except ValidationError as exc:
            raise ValidationError(str(exc), vid, None, rd["frame"]) from None
        out.append(FrameDetection(vid, int(rd["frame"]), rd["class"], box, score))
    return out
