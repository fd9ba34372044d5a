"""Placing scaled sprites on the frame grid (clipped or toroidally wrapped)."""

from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

from .occluders import ScaledSprite
from .regions import FG, Rect


def wrap_coordinate(v: float, lo: float, hi: float) -> float:
    w = lo + (v - lo) % (hi - lo)
    # float modulo of a tiny negative offset can land exactly on the span
    return lo if w >= hi else w


def placement_grid(
    scaled: ScaledSprite,
    center: Tuple[float, float],
    frame_w: int,
    frame_h: int,
    wrap_rect: Optional[Rect] = None,
):
    """Frame rows/cols hit by the padded sprite raster and the matching sprite rows/cols.

    With ``wrap_rect`` the raster wraps toroidally inside that rect; otherwise
    pixels off the frame are dropped.  Returns ``(rows, cols, sprite_rows,
    sprite_cols, unique)`` where ``unique`` is False when wrapping folded the
    sprite onto itself.
    """
    ph, pw = scaled.alpha.shape
    x0 = math.floor(center[0] - scaled.width / 2.0) - scaled.pad
    y0 = math.floor(center[1] - scaled.height / 2.0) - scaled.pad
    cols = x0 + np.arange(pw)
    rows = y0 + np.arange(ph)
    unique = True
    if wrap_rect is not None:
        cols = wrap_rect.x_min + np.mod(cols - wrap_rect.x_min, wrap_rect.width)
        rows = wrap_rect.y_min + np.mod(rows - wrap_rect.y_min, wrap_rect.height)
        unique = pw <= wrap_rect.width and ph <= wrap_rect.height
    ci = np.flatnonzero((cols >= 0) & (cols < frame_w))
    ri = np.flatnonzero((rows >= 0) & (rows < frame_h))
    return rows[ri], cols[ci], ri, ci, unique


def region_clip_mask(region: str, fg_rect: Rect, frame_w: int, frame_h: int) -> np.ndarray:
    m = np.zeros((frame_h, frame_w), dtype=bool)
    m[fg_rect.y_min:fg_rect.y_max, fg_rect.x_min:fg_rect.x_max] = True
    return m if region == FG else ~m


def footprint_layer(scaled, center, frame_w, frame_h, wrap_rect=None) -> np.ndarray:
    """Boolean frame-sized footprint of one placed sprite (before region clipping)."""
    canvas = np.zeros((frame_h, frame_w), dtype=bool)
    rows, cols, ri, ci, unique = placement_grid(scaled, center, frame_w, frame_h, wrap_rect)
    if rows.size == 0 or cols.size == 0:
        return canvas
    src = scaled.padded_footprint[np.ix_(ri, ci)]
    if unique:
        canvas[np.ix_(rows, cols)] = src
    else:
        np.logical_or.at(canvas, np.ix_(rows, cols), src)
    return canvas


def alpha_layers(scaled, center, frame_w, frame_h, wrap_rect=None):
    """Frame-sized ``(alpha, rgb)`` layers of one placed sprite (before region clipping)."""
    alpha = np.zeros((frame_h, frame_w), dtype=np.float64)
    rgb = np.zeros((frame_h, frame_w, 3), dtype=np.float64)
    rows, cols, ri, ci, unique = placement_grid(scaled, center, frame_w, frame_h, wrap_rect)
    if rows.size == 0 or cols.size == 0:
        return alpha, rgb
    ix = np.ix_(rows, cols)
    src_ix = np.ix_(ri, ci)
    if unique:
        alpha[ix] = scaled.alpha[src_ix]
    else:
        np.maximum.at(alpha, ix, scaled.alpha[src_ix])
    rgb[ix] = scaled.rgb[src_ix]
    return alpha, rgb
