"""Small synthetic dataset: frames, ground-truth tubes and an occluder library.

Used by the test-suite and the ``toy`` CLI command; every byte is a function of
the arguments.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Tuple

import numpy as np
from PIL import Image

from .model import ActionTube, BoundingBox, DatasetManifest, VideoRecord, dump_manifest
from .occluders import OccluderSprite, save_sprite, write_index
from .seeding import counter_rng, derive_seed

TOY_CLASSES = ("walk", "wave")


def _disc(size: int) -> np.ndarray:
    yy, xx = np.mgrid[:size, :size] + 0.5
    r = size / 2.0
    return ((xx - r) ** 2 + (yy - r) ** 2 <= r * r).astype(np.float64)


def _triangle(w: int, h: int) -> np.ndarray:
    yy, xx = np.mgrid[:h, :w] + 0.5
    half = (yy / h) * (w / 2.0)
    return (np.abs(xx - w / 2.0) <= half).astype(np.float64)


def _ring(size: int) -> np.ndarray:
    yy, xx = np.mgrid[:size, :size] + 0.5
    r = size / 2.0
    d = np.sqrt((xx - r) ** 2 + (yy - r) ** 2)
    return ((d <= r) & (d >= 0.45 * r)).astype(np.float64)


def _sprite(sprite_id: str, category: str, alpha: np.ndarray, color, label: str) -> OccluderSprite:
    h, w = alpha.shape
    rgba = np.zeros((h, w, 4), dtype=np.uint8)
    shade = np.linspace(0.7, 1.0, w)[None, :, None]
    rgba[..., :3] = np.clip(np.asarray(color)[None, None, :] * shade, 0, 255).astype(np.uint8)
    rgba[..., 3] = np.round(alpha * 255).astype(np.uint8)
    return OccluderSprite(sprite_id, category, rgba, label)


def toy_sprites() -> List[OccluderSprite]:
    return [
        _sprite("chair", "indoor", np.ones((30, 22)), (150, 90, 40), "chair"),
        _sprite("lamp", "indoor", _triangle(26, 34), (230, 220, 120), "lamp"),
        _sprite("plate", "indoor", _disc(28), (235, 235, 235), "plate"),
        _sprite("ship", "outdoor", np.ones((16, 40)), (60, 70, 160), "ship"),
        _sprite("tyre", "outdoor", _ring(32), (30, 30, 30), "tyre"),
        _sprite("sheep", "outdoor", _disc(36)[4:32], (245, 245, 230), "sheep"),
    ]


def toy_video(video_id: str, width: int = 320, height: int = 240, frame_count: int = 8, seed: int = 0,
              n_actors: int = 1, classes=TOY_CLASSES) -> VideoRecord:
    rng = counter_rng(derive_seed(seed, "toy-video", video_id))
    tubes = []
    for a in range(n_actors):
        bw = int(rng.integers(width // 8, width // 4))
        bh = int(rng.integers(height // 4, height // 2))
        vx = float(rng.uniform(-3, 3))
        x0 = float(rng.uniform(0.1 * width, 0.9 * width - bw - abs(vx) * frame_count))
        y0 = float(rng.uniform(0.1 * height, 0.9 * height - bh))
        frames = {}
        for t in range(frame_count):
            x = x0 + vx * t
            frames[t] = BoundingBox(round(x, 2), round(y0, 2), round(x + bw, 2), round(y0 + bh, 2))
        tubes.append(ActionTube(f"{video_id}-a{a}", classes[(a + len(video_id)) % len(classes)], frames))
    return VideoRecord(video_id, width, height, frame_count, f"frames/{video_id}/{{frame:04d}}.png", tuple(tubes))


def toy_frame(video_id: str, t: int, width: int, height: int) -> np.ndarray:
    """A deterministic RGB test pattern."""
    yy, xx = np.mgrid[:height, :width]
    base = derive_seed(0, video_id) % 97
    r = (xx * 255 // max(width - 1, 1) + base + 3 * t) % 256
    g = (yy * 255 // max(height - 1, 1) + 2 * t) % 256
    b = ((xx // 16 + yy // 16) % 2) * 120 + base
    return np.stack([r, g, b], axis=-1).astype(np.uint8)


def write_toy_dataset(root, n_videos: int = 2, frame_count: int = 8, width: int = 320, height: int = 240,
                      seed: int = 0) -> Tuple[Path, Path]:
    """Write ``manifest.json``, frames and an ``occluders/`` library under ``root``.

    Returns ``(manifest_path, occluder_dir)``.
    """
    root = Path(root)
    videos = [toy_video(f"v{i:02d}", width, height, frame_count, seed) for i in range(n_videos)]
    for v in videos:
        for t in range(v.frame_count):
            path = root / v.frame_path(t)
            path.parent.mkdir(parents=True, exist_ok=True)
            Image.fromarray(toy_frame(v.video_id, t, width, height)).save(path, format="PNG")
    manifest = DatasetManifest("toy", TOY_CLASSES, tuple(videos))
    manifest_path = root / "manifest.json"
    manifest_path.write_bytes(dump_manifest(manifest))
    occ_dir = root / "occluders"
    for s in toy_sprites():
        save_sprite(s, occ_dir)
    write_index(occ_dir)
    return manifest_path, occ_dir
