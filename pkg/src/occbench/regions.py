"""Actor (FG) / background (BG) regions and occlusion severity bands."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .errors import EmptyRegion, EmptyTube, OutOfCalibratedRange, ValidationError
from .model import ActionTube

FG = "FG"
BG = "BG"


@dataclass(frozen=True)
class Rect:
    """Integer, half-open pixel rectangle."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError(f"degenerate rect {self.as_list()}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min

    @property
    def area(self) -> int:
        return self.width * self.height

    def as_list(self) -> List[int]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    def contains_point(self, x: float, y: float) -> bool:
        return self.x_min <= x < self.x_max and self.y_min <= y < self.y_max


@dataclass(frozen=True)
class RegionSpec:
    kind: str
    fg_rect: Rect
    frame_width: int
    frame_height: int

    def __post_init__(self):
        if self.kind not in (FG, BG):
            raise ValueError(f"region kind must be FG or BG, got {self.kind!r}")
        r = self.fg_rect
        if r.x_min < 0 or r.y_min < 0 or r.x_max > self.frame_width or r.y_max > self.frame_height:
            raise ValidationError(f"fg rect {r.as_list()} outside {self.frame_width}x{self.frame_height} frame")

    @property
    def frame_rect(self) -> Rect:
        return Rect(0, 0, self.frame_width, self.frame_height)

    @property
    def bounding_rect(self) -> Rect:
        """Smallest rect containing the region's pixels (the whole frame for BG)."""
        return self.fg_rect if self.kind == FG else self.frame_rect

    def mask(self) -> np.ndarray:
        """Boolean ``(height, width)`` mask of the region's pixels."""
        m = np.zeros((self.frame_height, self.frame_width), dtype=bool)
        r = self.fg_rect
        m[r.y_min:r.y_max, r.x_min:r.x_max] = True
        return m if self.kind == FG else ~m


@dataclass(frozen=True)
class SeverityBand:
    level: int
    lo: float
    hi: float

    def __contains__(self, fraction: float) -> bool:
        return self.lo <= fraction < self.hi


SEVERITY_BANDS = {
    1: SeverityBand(1, 0.0, 0.2),
    2: SeverityBand(2, 0.2, 0.4),
    3: SeverityBand(3, 0.4, 0.6),
}


def envelope(boxes: Iterable) -> Rect:
    boxes = list(boxes)
    if not boxes:
        raise EmptyTube("no boxes to enclose")
    return Rect(
        math.floor(min(b.x_min for b in boxes)),
        math.floor(min(b.y_min for b in boxes)),
        math.ceil(max(b.x_max for b in boxes)),
        math.ceil(max(b.y_max for b in boxes)),
    )


def actor_region(tube: ActionTube) -> Rect:
    """Tightest integer rect enclosing every box of the tube, rounded outward."""
    if tube is None or not tube.frames:
        raise EmptyTube("tube has no boxes")
    return envelope(tube.frames.values())


def actor_region_for_tubes(tubes: Sequence[ActionTube]) -> Rect:
    """Envelope over several actors; used as the FG rect of multi-actor videos."""
    boxes = [b for t in tubes for b in t.frames.values()]
    if not boxes:
        raise EmptyTube("no ground-truth boxes in video")
    return envelope(boxes)


def region_area(region: RegionSpec) -> int:
    fg = region.fg_rect.area
    return fg if region.kind == FG else region.frame_width * region.frame_height - fg


def paint_footprints(footprints, width: int, height: int) -> np.ndarray:
    """Union of placed boolean masks on a ``(height, width)`` canvas.

    Each footprint is ``(mask, (x0, y0))`` with ``(x0, y0)`` the canvas position of
    ``mask[0, 0]``; parts falling off the canvas are dropped.
    """
    canvas = np.zeros((height, width), dtype=bool)
    for mask, (x0, y0) in footprints:
        mask = np.asarray(mask, dtype=bool)
        h, w = mask.shape
        cx0, cy0 = max(x0, 0), max(y0, 0)
        cx1, cy1 = min(x0 + w, width), min(y0 + h, height)
        if cx0 >= cx1 or cy0 >= cy1:
            continue
        canvas[cy0:cy1, cx0:cx1] |= mask[cy0 - y0:cy1 - y0, cx0 - x0:cx1 - x0]
    return canvas


def occupied_fraction(footprints, region: RegionSpec) -> float:
    """Fraction of the region covered by the union of footprint pixels."""
    area = region_area(region)
    if area <= 0:
        raise EmptyRegion(f"{region.kind} region has zero area")
    canvas = paint_footprints(footprints, region.frame_width, region.frame_height)
    return mask_fraction(canvas, region)


def mask_fraction(canvas: np.ndarray, region: RegionSpec) -> float:
    """Fraction of the region covered by a frame-sized boolean canvas."""
    area = region_area(region)
    if area <= 0:
        raise EmptyRegion(f"{region.kind} region has zero area")
    r = region.fg_rect
    inside = int(np.count_nonzero(canvas[r.y_min:r.y_max, r.x_min:r.x_max]))
    covered = inside if region.kind == FG else int(np.count_nonzero(canvas)) - inside
    return covered / area


def _union_area(rects: Sequence[Tuple[int, int, int, int]]) -> int:
    """Exact area of a union of integer rects by coordinate compression."""
    rects = [r for r in rects if r[0] < r[2] and r[1] < r[3]]
    if not rects:
        return 0
    xs = sorted({r[0] for r in rects} | {r[2] for r in rects})
    ys = sorted({r[1] for r in rects} | {r[3] for r in rects})
    xi = {x: i for i, x in enumerate(xs)}
    yi = {y: i for i, y in enumerate(ys)}
    cover = np.zeros((len(ys) - 1, len(xs) - 1), dtype=bool)
    for x0, y0, x1, y1 in rects:
        cover[yi[y0]:yi[y1], xi[x0]:xi[x1]] = True
    cell = np.outer(np.diff(ys), np.diff(xs))
    return int(cell[cover].sum())


def rect_occupied_fraction(rects: Sequence[Rect], region: RegionSpec) -> float:
    """Closed-form ``occupied_fraction`` for axis-aligned rectangular footprints."""
    area = region_area(region)
    if area <= 0:
        raise EmptyRegion(f"{region.kind} region has zero area")
    W, H = region.frame_width, region.frame_height
    f = region.fg_rect

    def clip(r, x0, y0, x1, y1):
        return (max(r.x_min, x0), max(r.y_min, y0), min(r.x_max, x1), min(r.y_max, y1))

    in_fg = _union_area([clip(r, f.x_min, f.y_min, f.x_max, f.y_max) for r in rects])
    if region.kind == FG:
        return in_fg / area
    in_frame = _union_area([clip(r, 0, 0, W, H) for r in rects])
    return (in_frame - in_fg) / area


def severity_level(fraction: float) -> int:
    """Severity level (1, 2 or 3) of an occupied-area fraction."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    for band in SEVERITY_BANDS.values():
        if fraction in band:
            return band.level
    raise OutOfCalibratedRange(f"fraction {fraction:.3f} is above the calibrated 0.6 ceiling")
