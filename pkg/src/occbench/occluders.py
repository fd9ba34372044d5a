"""Occluder sprite library: import, catalog, scaling and footprints."""

from __future__ import annotations

import functools
import io
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import DecodeError, EmptySprite, MissingSprite, Unfittable, UnknownCategory
from .regions import RegionSpec, region_area

log = logging.getLogger(__name__)

CATEGORIES = ("indoor", "outdoor")
ALPHA_THRESHOLD = 0.5
FEATHER_SIGMA = 1.0
# alpha is stored as uint8; alpha/255 >= 0.5  <=>  alpha >= 128
_ALPHA_U8_THRESHOLD = 128
_FEATHER_PAD = 3


@dataclass(frozen=True, eq=False)
class OccluderSprite:
    """Trimmed RGBA cut-out. ``rgba`` is a ``(H, W, 4)`` uint8 array."""

    sprite_id: str
    category: str
    rgba: np.ndarray
    source_label: str = ""

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise UnknownCategory(f"category must be one of {CATEGORIES}, got {self.category!r}")
        if self.rgba.ndim != 3 or self.rgba.shape[2] != 4 or 0 in self.rgba.shape[:2]:
            raise DecodeError(f"sprite {self.sprite_id!r}: expected non-empty HxWx4 array, got {self.rgba.shape}")
        if self.footprint_area == 0:
            raise EmptySprite(f"sprite {self.sprite_id!r} has no pixel with alpha >= {ALPHA_THRESHOLD}")

    @property
    def width(self) -> int:
        return self.rgba.shape[1]

    @property
    def height(self) -> int:
        return self.rgba.shape[0]

    @property
    def alpha(self) -> np.ndarray:
        return self.rgba[..., 3] / 255.0

    @property
    def footprint(self) -> np.ndarray:
        return self.rgba[..., 3] >= _ALPHA_U8_THRESHOLD

    @functools.cached_property
    def footprint_area(self) -> int:
        return int(np.count_nonzero(self.footprint))

    def meta(self) -> dict:
        return {"sprite_id": self.sprite_id, "category": self.category, "source_label": self.source_label}

    def to_png(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.rgba, "RGBA").save(buf, format="PNG")
        return buf.getvalue()

    def same_as(self, other: "OccluderSprite") -> bool:
        return self.meta() == other.meta() and np.array_equal(self.rgba, other.rgba)


def trim_to_footprint(rgba: np.ndarray) -> np.ndarray:
    fp = rgba[..., 3] >= _ALPHA_U8_THRESHOLD
    if not fp.any():
        raise EmptySprite(f"no pixel with alpha >= {ALPHA_THRESHOLD}")
    rows = np.flatnonzero(fp.any(axis=1))
    cols = np.flatnonzero(fp.any(axis=0))
    return np.ascontiguousarray(rgba[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1])


def import_sprite(rgba_image: bytes, meta: dict) -> OccluderSprite:
    """Decode an image, trim it to its alpha footprint and tag it."""
    category = meta.get("category")
    if category not in CATEGORIES:
        raise UnknownCategory(f"category must be one of {CATEGORIES}, got {category!r}")
    try:
        with Image.open(io.BytesIO(rgba_image)) as img:
            rgba = np.asarray(img.convert("RGBA"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode sprite {meta.get('sprite_id')!r}: {exc}") from None
    try:
        rgba = trim_to_footprint(rgba)
    except EmptySprite:
        raise EmptySprite(f"sprite {meta.get('sprite_id')!r} is fully transparent") from None
    return OccluderSprite(str(meta["sprite_id"]), category, rgba, str(meta.get("source_label", "")))


# -- scaling -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScaledSprite:
    """A sprite resampled to one scale, ready to place.

    ``footprint`` (pre-feather alpha >= 0.5) has shape ``(h, w)``.  ``rgb``,
    ``alpha`` (feathered) and ``padded_footprint`` are padded by ``pad`` pixels
    on every side so a feathered edge can spill past the footprint.
    """

    footprint: np.ndarray
    rgb: np.ndarray
    alpha: np.ndarray
    pad: int
    padded_footprint: np.ndarray

    @property
    def height(self) -> int:
        return self.footprint.shape[0]

    @property
    def width(self) -> int:
        return self.footprint.shape[1]


def scaled_size(sprite: OccluderSprite, scale: float) -> Tuple[int, int]:
    """``(width, height)`` of the sprite raster at ``scale``."""
    return max(1, int(round(sprite.width * scale))), max(1, int(round(sprite.height * scale)))


def _resize(channel: np.ndarray, size: Tuple[int, int]) -> np.ndarray:
    img = Image.fromarray(channel.astype(np.float32), mode="F")
    return np.asarray(img.resize(size, Image.BILINEAR), dtype=np.float64)


def feather(alpha: np.ndarray, footprint: np.ndarray, sigma: float = FEATHER_SIGMA) -> np.ndarray:
    """Blur ``alpha`` across the footprint boundary only."""
    blurred = ndimage.gaussian_filter(alpha, sigma, mode="constant")
    edge = ndimage.binary_dilation(footprint) & ~ndimage.binary_erosion(footprint)
    return np.where(edge, blurred, alpha)


@functools.lru_cache(maxsize=4096)
def scale_sprite(sprite: OccluderSprite, scale: float, soft: bool = True) -> ScaledSprite:
    """Bilinear RGBA resample with the alpha re-thresholded into a footprint."""
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    size = scaled_size(sprite, scale)
    alpha = sprite.alpha
    premult = sprite.rgba[..., :3] * alpha[..., None]
    a = np.clip(_resize(alpha, size), 0.0, 1.0)
    rgb = np.stack([_resize(premult[..., c], size) for c in range(3)], axis=-1)
    safe = np.where(a > 0, a, 1.0)
    rgb = np.clip(rgb / safe[..., None], 0.0, 255.0)
    footprint = a >= ALPHA_THRESHOLD
    p = _FEATHER_PAD
    rendered = np.pad(np.where(footprint, a, 0.0), p)
    if soft:
        rendered = feather(rendered, np.pad(footprint, p))
    rgb = np.pad(rgb, ((p, p), (p, p), (0, 0)), mode="edge")
    padded_fp = np.pad(footprint, p)
    for arr in (footprint, rendered, rgb, padded_fp):
        arr.setflags(write=False)
    return ScaledSprite(footprint, rgb, rendered, p, padded_fp)


def fit_scale_for_budget(sprite: OccluderSprite, region: RegionSpec, budget: Tuple[float, float]) -> float:
    """Scale whose footprint covers a fraction of ``region`` inside ``budget``.

    The scaled sprite must also fit in the region's bounding rect.  Returns the
    scale hitting the midpoint of the feasible fraction interval.
    """
    lo, hi = budget
    if not 0.0 < lo <= hi <= 1.0:
        raise ValueError(f"budget must satisfy 0 < lo <= hi <= 1, got {budget}")
    area = region_area(region)
    if area <= 0:
        raise Unfittable(f"{region.kind} region has zero area")
    rect = region.bounding_rect
    s_fit = min(rect.width / sprite.width, rect.height / sprite.height)
    frac_fit = sprite.footprint_area * s_fit * s_fit / area
    top = min(hi, frac_fit)
    if top < lo:
        raise Unfittable(
            f"sprite {sprite.sprite_id!r} reaches at most {frac_fit:.4f} of the {region.kind} region "
            f"inside its {rect.width}x{rect.height} bounds; budget starts at {lo:.4f}"
        )
    mid = 0.5 * (lo + top)
    return math.sqrt(mid * area / sprite.footprint_area)


# -- library -------------------------------------------------------------------


@dataclass(frozen=True)
class OccluderSet:
    sprites: Tuple[OccluderSprite, ...]
    filter: str = "all"

    def __post_init__(self):
        if self.filter not in CATEGORIES + ("all",):
            raise UnknownCategory(f"filter must be indoor, outdoor or all, got {self.filter!r}")
        kept = tuple(s for s in self.sprites if self.filter == "all" or s.category == self.filter)
        if not kept:
            raise EmptySprite(f"no {self.filter} occluders in the library")
        object.__setattr__(self, "sprites", tuple(sorted(kept, key=lambda s: s.sprite_id)))

    def __len__(self) -> int:
        return len(self.sprites)

    def by_id(self) -> Dict[str, OccluderSprite]:
        return {s.sprite_id: s for s in self.sprites}

    def get(self, sprite_id: str) -> OccluderSprite:
        for s in self.sprites:
            if s.sprite_id == sprite_id:
                return s
        raise MissingSprite(f"sprite {sprite_id!r} not in occluder set")

    def choose(self, rng: np.random.Generator) -> OccluderSprite:
        return self.sprites[int(rng.integers(len(self.sprites)))]


INDEX_NAME = "index.json"
IMAGE_SUFFIXES = (".png", ".webp", ".tif", ".tiff", ".gif")


def save_sprite(sprite: OccluderSprite, library_dir: Path) -> None:
    library_dir = Path(library_dir)
    library_dir.mkdir(parents=True, exist_ok=True)
    (library_dir / f"{sprite.sprite_id}.png").write_bytes(sprite.to_png())
    (library_dir / f"{sprite.sprite_id}.json").write_text(json.dumps(sprite.meta(), indent=2) + "\n")


def write_index(library_dir: Path) -> List[dict]:
    library_dir = Path(library_dir)
    entries = []
    for meta_path in sorted(library_dir.glob("*.json")):
        if meta_path.name == INDEX_NAME:
            continue
        meta = json.loads(meta_path.read_text())
        entries.append({**meta, "image": f"{meta['sprite_id']}.png"})
    (library_dir / INDEX_NAME).write_text(json.dumps({"sprites": entries}, indent=2) + "\n")
    return entries


def import_directory(src_dir, category: str, library_dir) -> List[OccluderSprite]:
    """Import every image in ``src_dir`` as a ``category`` sprite.

    An optional ``<stem>.json`` next to an image may supply ``source_label``
    (and override ``sprite_id``).
    """
    if category not in CATEGORIES:
        raise UnknownCategory(f"category must be one of {CATEGORIES}, got {category!r}")
    src_dir = Path(src_dir)
    imported = []
    for path in sorted(p for p in src_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES):
        meta = {"sprite_id": path.stem, "category": category, "source_label": path.stem}
        side = path.with_suffix(".json")
        if side.exists():
            extra = json.loads(side.read_text())
            meta.update({k: extra[k] for k in ("sprite_id", "source_label") if k in extra})
        sprite = import_sprite(path.read_bytes(), meta)
        save_sprite(sprite, library_dir)
        imported.append(sprite)
        log.debug("imported %s (%dx%d, footprint %d px)", sprite.sprite_id, sprite.width, sprite.height, sprite.footprint_area)
    write_index(library_dir)
    return imported


def load_library(library_dir, filter: str = "all") -> OccluderSet:
    library_dir = Path(library_dir)
    index_path = library_dir / INDEX_NAME
    if not index_path.exists():
        raise MissingSprite(f"no {INDEX_NAME} in occluder library {library_dir}")
    sprites = []
    for entry in json.loads(index_path.read_text())["sprites"]:
        image = library_dir / entry["image"]
        if not image.exists():
            raise MissingSprite(f"sprite image {image} listed in index is missing")
        sprites.append(import_sprite(image.read_bytes(), entry))
    return OccluderSet(tuple(sprites), filter)
