"""Rendering occlusion plans onto frames, plus pixel-space patch blackout."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from .errors import DimensionMismatch, IndivisibleDims, MissingSprite, ProbabilityOutOfRange
from .masking import MaskConfig, bernoulli_mask
from .occluders import OccluderSet, OccluderSprite, scale_sprite
from .raster import alpha_layers, region_clip_mask
from .regions import FG, Rect
from .trajectory import OcclusionPlan, Placement, placement_footprint

log = logging.getLogger(__name__)

SEVERITY_TOLERANCE = 0.01


def blend(frame: np.ndarray, rgb: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """``alpha * rgb + (1 - alpha) * frame`` per channel, in float."""
    a = np.asarray(alpha, dtype=np.float64)[..., None]
    return a * rgb + (1.0 - a) * frame


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def _wrap_rect(pl: Placement, fg_rect: Rect, w: int, h: int):
    if not pl.wrap:
        return None
    return fg_rect if pl.region == FG else Rect(0, 0, w, h)


def _clipped_layers(sprite: OccluderSprite, pl: Placement, fg_rect: Rect, w: int, h: int):
    scaled = scale_sprite(sprite, pl.scale)
    alpha, rgb = alpha_layers(scaled, pl.position, w, h, _wrap_rect(pl, fg_rect, w, h))
    alpha *= region_clip_mask(pl.region, fg_rect, w, h)
    return alpha, rgb


def composite_frame(frame: np.ndarray, placements: Sequence[Tuple[OccluderSprite, Placement]], fg_rect: Rect) -> np.ndarray:
    """Alpha-composite placed sprites over one RGB frame, in list order.

    FG-assigned sprites are invisible outside ``fg_rect`` and BG-assigned ones
    inside it.
    """
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise DimensionMismatch(f"expected an HxWx3 frame, got {frame.shape}")
    h, w = frame.shape[:2]
    if fg_rect.x_max > w or fg_rect.y_max > h:
        raise DimensionMismatch(f"fg rect {fg_rect.as_list()} exceeds {w}x{h} frame")
    out = frame.astype(np.float64)
    for sprite, pl in placements:
        alpha, rgb = _clipped_layers(sprite, pl, fg_rect, w, h)
        out = blend(out, rgb, alpha)
    return to_uint8(out)


@dataclass(frozen=True, eq=False)
class RenderResult:
    frames: List[np.ndarray]
    realized_severity: Dict[int, Tuple[float, float]]
    plan_echo: OcclusionPlan

    def max_severity_drift(self) -> float:
        """Largest gap between the plan's stored fractions and the rendered ones."""
        drift = 0.0
        for t, (fg, bg) in self.realized_severity.items():
            if t in self.plan_echo.realized_severity:
                sfg, sbg = self.plan_echo.realized_severity[t]
                drift = max(drift, abs(sfg - fg), abs(sbg - bg))
        return drift


def _sprite_map(sprites) -> Mapping[str, OccluderSprite]:
    if isinstance(sprites, OccluderSet):
        return sprites.by_id()
    if isinstance(sprites, Mapping):
        return sprites
    return {s.sprite_id: s for s in sprites}


def render_plan(frames: Sequence[np.ndarray], plan: OcclusionPlan, sprites) -> RenderResult:
    """Render every frame of ``plan`` and re-measure its realized severity."""
    sprites = _sprite_map(sprites)
    if len(frames) != plan.frame_count:
        raise DimensionMismatch(f"plan covers {plan.frame_count} frames, got {len(frames)}")
    for trk in plan.occluders:
        if trk.sprite_id not in sprites:
            raise MissingSprite(f"plan uses sprite {trk.sprite_id!r} which is not loaded")
    W, H = plan.frame_width, plan.frame_height
    fg_rect = plan.fg_rect
    fg_area = fg_rect.area
    bg_area = W * H - fg_area
    layer_cache: Dict[Placement, tuple] = {}
    out_frames = []
    severity = {}
    for t, frame in enumerate(frames):
        frame = np.asarray(frame)
        if frame.shape != (H, W, 3):
            raise DimensionMismatch(f"frame {t} has shape {frame.shape}, plan expects {(H, W, 3)}")
        placements = plan.placements_at(t)
        if not placements:
            out_frames.append(frame.copy())
            severity[t] = (0.0, 0.0)
            continue
        out = frame.astype(np.float64)
        fg_union = np.zeros((H, W), dtype=bool)
        bg_union = np.zeros((H, W), dtype=bool)
        for pl in placements:
            if pl not in layer_cache:
                sprite = sprites[pl.sprite_id]
                alpha, rgb = _clipped_layers(sprite, pl, fg_rect, W, H)
                layer_cache[pl] = (alpha, rgb, placement_footprint(pl, sprite, fg_rect, W, H))
            alpha, rgb, fp = layer_cache[pl]
            out = blend(out, rgb, alpha)
            if pl.region == FG:
                fg_union |= fp
            else:
                bg_union |= fp
        out_frames.append(to_uint8(out))
        severity[t] = (
            float(np.count_nonzero(fg_union) / fg_area),
            float(np.count_nonzero(bg_union) / bg_area) if bg_area > 0 else 0.0,
        )
        if len(layer_cache) > 256:
            layer_cache.clear()
    result = RenderResult(out_frames, severity, plan)
    drift = result.max_severity_drift()
    if drift > SEVERITY_TOLERANCE:
        log.warning("video %s: rendered severity drifts %.4f from the plan", plan.video_id, drift)
    return result


def patch_blackout(frames, patch_dims: Tuple[int, int, int], p: float, seed: int) -> np.ndarray:
    """Zero whole ``t x h x w`` spatio-temporal patches, each with probability ``p``.

    The pixel-space counterpart of token masking: the clip is cut into a
    ``T/t x H/h x W/w`` grid and patch k is dropped when mask entry k is 0.
    """
    clip = np.asarray(frames)
    if clip.ndim not in (3, 4):
        raise DimensionMismatch(f"expected T x H x W (x C) frames, got {clip.shape}")
    if not 0.0 <= p <= 1.0:
        raise ProbabilityOutOfRange(f"p must lie in [0, 1], got {p}")
    T, H, W = clip.shape[:3]
    pt, ph, pw = patch_dims
    if min(pt, ph, pw) < 1 or T % pt or H % ph or W % pw:
        raise IndivisibleDims(f"patch {patch_dims} does not tile a {T}x{H}x{W} clip")
    grid = (T // pt, H // ph, W // pw)
    keep = bernoulli_mask(grid[0] * grid[1] * grid[2], MaskConfig(p, seed)).reshape(grid)
    full = keep.repeat(pt, 0).repeat(ph, 1).repeat(pw, 2)
    if clip.ndim == 4:
        full = full[..., None]
    return np.where(full == 1, clip, np.zeros((), dtype=clip.dtype))


# -- file IO -------------------------------------------------------------------


def read_frame(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def write_frame(path, frame: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(frame, dtype=np.uint8), "RGB").save(path, format="PNG")


def severity_csv(severity: Mapping[int, Tuple[float, float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["frame_index", "fg_fraction", "bg_fraction"])
    for t in sorted(severity):
        fg, bg = severity[t]
        writer.writerow([t, repr(float(fg)), repr(float(bg))])
    return buf.getvalue()
