"""Static placement and dynamic trajectories of occluders, under severity targets.

Every random choice comes from counter-based streams derived from the plan
seed, so a plan is a pure function of (video, parameters, seed).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyRegion, MotionSplitViolation, SeverityUnreachable, Unfittable
from .model import VideoRecord
from .occluders import OccluderSet, OccluderSprite, fit_scale_for_budget, scale_sprite, scaled_size
from .raster import footprint_layer, region_clip_mask, wrap_coordinate
from .regions import BG, FG, SEVERITY_BANDS, Rect, RegionSpec, actor_region_for_tubes, region_area
from .seeding import counter_rng, derive_seed

log = logging.getLogger(__name__)

MOTION_KINDS = ("static", "linear", "circle", "sinusoid", "zoom_in", "zoom_out", "random")
TEST_MOTIONS = frozenset({"circle", "sinusoid"})
TRAIN_MOTIONS = frozenset({"linear", "zoom_in", "zoom_out", "random"})
SPLITS = ("train", "test")

_PARAM_KEYS = {
    "static": (),
    "linear": ("velocity",),
    "circle": ("center", "radius", "angular_speed", "phase"),
    "sinusoid": ("drift", "amplitude", "period"),
    "zoom_in": ("scale_rate",),
    "zoom_out": ("scale_rate",),
    "random": ("step_sigma", "max_speed", "seed"),
}

MAX_ITERATIONS = 200
DEFAULT_DYNAMIC_TARGET = (2, 3)
DEFAULT_MIN_SCALE = 0.05
# candidate positions tried per sampled occluder
_CANDIDATES = 6
_RESCALE_STEPS = 8
# aim strictly inside each band; level 1 needs at least some occlusion
_TARGETS = {1: (0.05, 0.18), 2: (0.22, 0.38), 3: (0.42, 0.58)}


def normalize_kind(kind: str) -> str:
    kind = kind.replace("-", "_")
    if kind not in MOTION_KINDS:
        raise ValueError(f"unknown motion {kind!r}; expected one of {', '.join(MOTION_KINDS)}")
    return kind


def check_motion_split(kind: str, split: Optional[str]) -> None:
    """Train and test motions are disjoint; static is allowed everywhere."""
    kind = normalize_kind(kind)
    if kind == "static":
        return
    if split not in SPLITS:
        raise MotionSplitViolation(f"{kind} motion needs split train or test, got {split!r}")
    allowed = TRAIN_MOTIONS if split == "train" else TEST_MOTIONS
    if kind not in allowed:
        raise MotionSplitViolation(
            f"{kind} motion is reserved for the {'test' if split == 'train' else 'train'} split "
            f"({split} allows {', '.join(sorted(allowed))})"
        )


@dataclass(frozen=True)
class MotionSpec:
    """Occluder motion. Parameter units are pixels, frames and radians per frame.

    linear: velocity (vx, vy); circle: center, radius, angular_speed, phase;
    sinusoid: drift (x px/frame), amplitude, period; zoom_in/zoom_out:
    scale_rate; random: step_sigma, max_speed, seed.
    """

    kind: str
    params: dict = field(default_factory=dict)
    split: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", normalize_kind(self.kind))
        check_motion_split(self.kind, self.split)
        unknown = set(self.params) - set(_PARAM_KEYS[self.kind])
        if unknown:
            raise ValueError(f"unknown {self.kind} parameters: {sorted(unknown)}")

    def param(self, name: str):
        try:
            return self.params[name]
        except KeyError:
            raise ValueError(f"{self.kind} motion is missing parameter {name!r}") from None

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": _jsonable(self.params), "split": self.split}

    @classmethod
    def from_json(cls, d: dict) -> "MotionSpec":
        return cls(d["kind"], dict(d.get("params", {})), d.get("split"))


def _jsonable(params: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in params.items()}


# -- trajectories ----------------------------------------------------------------


def random_walk(seed: int, step_sigma: float, max_speed: float, steps: int) -> np.ndarray:
    """Offsets ``(steps + 1, 2)`` of a walk whose velocity gets Gaussian kicks, capped at ``max_speed``."""
    kicks = counter_rng(seed).standard_normal((steps, 2)) * step_sigma
    out = np.zeros((steps + 1, 2))
    vel = np.zeros(2)
    for k in range(steps):
        vel = vel + kicks[k]
        speed = math.hypot(vel[0], vel[1])
        if speed > max_speed:
            vel *= max_speed / speed
        out[k + 1] = out[k] + vel
    return out


def trajectory_position(motion: MotionSpec, start: Tuple[float, float], t: int) -> Tuple[Tuple[float, float], float]:
    """Unwrapped sprite-center position and scale multiplier at frame ``t``."""
    if t < 0:
        raise ValueError(f"frame index must be >= 0, got {t}")
    sx, sy = start
    kind = motion.kind
    if kind == "static":
        return (sx, sy), 1.0
    if kind == "linear":
        vx, vy = motion.param("velocity")
        return (sx + vx * t, sy + vy * t), 1.0
    if kind == "circle":
        cx, cy = motion.params.get("center", start)
        r = motion.param("radius")
        theta = motion.params.get("phase", 0.0) + motion.param("angular_speed") * t
        return (cx + r * math.cos(theta), cy + r * math.sin(theta)), 1.0
    if kind == "sinusoid":
        x = sx + motion.param("drift") * t
        y = sy + motion.param("amplitude") * math.sin(2.0 * math.pi * t / motion.param("period"))
        return (x, y), 1.0
    if kind == "zoom_in":
        return (sx, sy), math.exp(motion.param("scale_rate") * t)
    if kind == "zoom_out":
        return (sx, sy), math.exp(-motion.param("scale_rate") * t)
    # random
    off = random_walk(motion.param("seed"), motion.param("step_sigma"), motion.param("max_speed"), t)[t]
    return (sx + float(off[0]), sy + float(off[1])), 1.0


def trajectory(motion: MotionSpec, start: Tuple[float, float], frame_count: int):
    """``trajectory_position`` for frames ``0 .. frame_count-1`` (one walk for random motion)."""
    if motion.kind != "random":
        return [trajectory_position(motion, start, t) for t in range(frame_count)]
    walk = random_walk(motion.param("seed"), motion.param("step_sigma"), motion.param("max_speed"), max(frame_count - 1, 0))
    return [((start[0] + float(dx), start[1] + float(dy)), 1.0) for dx, dy in walk[:frame_count]]


def wrap_position(position: Tuple[float, float], region_rect: Rect) -> Tuple[float, float]:
    """Toroidal wrap of a sprite center into ``region_rect``."""
    x, y = position
    return (
        wrap_coordinate(x, region_rect.x_min, region_rect.x_max),
        wrap_coordinate(y, region_rect.y_min, region_rect.y_max),
    )


def resolve_motion(motion: MotionSpec, wrap_rect: Rect, frame_count: int, occluder_seed: int) -> MotionSpec:
    """Fill unset parameters with region-relative defaults.

    Circles get radius = 1/4 of the shorter rect side and one revolution per
    clip; sinusoids get amplitude = 1/6 of the rect height and one period per
    clip.  Linear and random motion draw their heading from ``occluder_seed``.
    """
    n = max(frame_count, 1)
    w, h = wrap_rect.width, wrap_rect.height
    rng = counter_rng(occluder_seed)
    p = dict(motion.params)
    if motion.kind == "linear" and "velocity" not in p:
        heading = float(rng.uniform(0.0, 2.0 * math.pi))
        speed = max(w, h) / n
        p["velocity"] = [speed * math.cos(heading), speed * math.sin(heading)]
    elif motion.kind == "circle":
        p.setdefault("radius", 0.25 * min(w, h))
        p.setdefault("angular_speed", 2.0 * math.pi / n)
        p.setdefault("phase", 0.0)
    elif motion.kind == "sinusoid":
        p.setdefault("drift", w / n)
        p.setdefault("amplitude", h / 6.0)
        p.setdefault("period", float(n))
    elif motion.kind in ("zoom_in", "zoom_out"):
        p.setdefault("scale_rate", math.log(1.5) / max(n - 1, 1))
    elif motion.kind == "random":
        p.setdefault("step_sigma", 1.0)
        p.setdefault("max_speed", 4.0)
        p.setdefault("seed", derive_seed(occluder_seed, "walk"))
    return MotionSpec(motion.kind, p, motion.split)


# -- plan types ------------------------------------------------------------------


@dataclass(frozen=True)
class Placement:
    sprite_id: str
    region: str
    position: Tuple[float, float]
    scale: float
    wrap: bool = False

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"placement scale must be positive, got {self.scale}")
        if self.region not in (FG, BG):
            raise ValueError(f"placement region must be FG or BG, got {self.region!r}")


@dataclass(frozen=True)
class OccluderTrack:
    sprite_id: str
    region: str
    motion: MotionSpec
    wrap: bool
    frames: Dict[int, Placement]


@dataclass(frozen=True)
class OcclusionPlan:
    video_id: str
    seed: int
    mode: str
    frame_width: int
    frame_height: int
    frame_count: int
    fg_rect: Rect
    target: Tuple[int, int]
    occluders: Tuple[OccluderTrack, ...]
    realized_severity: Dict[int, Tuple[float, float]]
    multi_actor: bool = False
    iterations: int = 0

    def placements_at(self, frame_index: int) -> List[Placement]:
        return [trk.frames[frame_index] for trk in self.occluders if frame_index in trk.frames]

    def mean_severity(self) -> Tuple[float, float]:
        vals = np.array(list(self.realized_severity.values()), dtype=float).reshape(-1, 2)
        return (float(vals[:, 0].mean()), float(vals[:, 1].mean())) if len(vals) else (0.0, 0.0)

    def to_json(self) -> dict:
        return {
            "video_id": self.video_id,
            "seed": self.seed,
            "mode": self.mode,
            "frame_width": self.frame_width,
            "frame_height": self.frame_height,
            "frame_count": self.frame_count,
            "fg_rect": self.fg_rect.as_list(),
            "fg_multi_actor": self.multi_actor,
            "target": {"fg_level": self.target[0], "bg_level": self.target[1]},
            "iterations": self.iterations,
            "occluders": [
                {
                    "sprite_id": trk.sprite_id,
                    "region": trk.region,
                    "wrap": trk.wrap,
                    "motion": trk.motion.to_json(),
                    "frames": {
                        str(t): {"position": list(pl.position), "scale": pl.scale} for t, pl in trk.frames.items()
                    },
                }
                for trk in self.occluders
            ],
            "realized_severity": {str(t): list(v) for t, v in self.realized_severity.items()},
        }

    @classmethod
    def from_json(cls, d: dict) -> "OcclusionPlan":
        tracks = []
        for o in d["occluders"]:
            frames = {
                int(t): Placement(o["sprite_id"], o["region"], tuple(pl["position"]), pl["scale"], o["wrap"])
                for t, pl in o["frames"].items()
            }
            tracks.append(OccluderTrack(o["sprite_id"], o["region"], MotionSpec.from_json(o["motion"]), o["wrap"], dict(sorted(frames.items()))))
        tgt = d["target"]
        return cls(
            video_id=d["video_id"],
            seed=int(d["seed"]),
            mode=d["mode"],
            frame_width=int(d["frame_width"]),
            frame_height=int(d["frame_height"]),
            frame_count=int(d["frame_count"]),
            fg_rect=Rect(*d["fg_rect"]),
            target=(tgt["fg_level"], tgt["bg_level"]),
            occluders=tuple(tracks),
            realized_severity={int(t): tuple(v) for t, v in sorted(d["realized_severity"].items(), key=lambda kv: int(kv[0]))},
            multi_actor=bool(d.get("fg_multi_actor", False)),
            iterations=int(d.get("iterations", 0)),
        )


def dump_plan(plan: OcclusionPlan) -> bytes:
    """Canonical sidecar bytes (stable key order, exact float repr)."""
    return (json.dumps(plan.to_json(), sort_keys=True, indent=1) + "\n").encode("utf-8")


def load_plan(document) -> OcclusionPlan:
    if isinstance(document, (bytes, bytearray)):
        document = document.decode("utf-8")
    return OcclusionPlan.from_json(json.loads(document))


# -- severity measurement ----------------------------------------------------------


def placement_footprint(placement: Placement, sprite: OccluderSprite, fg_rect: Rect, frame_w: int, frame_h: int) -> np.ndarray:
    """Region-clipped footprint of one placement on the frame grid."""
    wrap_rect = None
    if placement.wrap:
        wrap_rect = fg_rect if placement.region == FG else Rect(0, 0, frame_w, frame_h)
    scaled = scale_sprite(sprite, placement.scale)
    layer = footprint_layer(scaled, placement.position, frame_w, frame_h, wrap_rect)
    return layer & region_clip_mask(placement.region, fg_rect, frame_w, frame_h)


def frame_severity(placements: Sequence[Placement], sprites: Dict[str, OccluderSprite], fg_rect: Rect, frame_w: int, frame_h: int) -> Tuple[float, float]:
    """(FG, BG) union-footprint fractions for one frame."""
    fg_union = np.zeros((frame_h, frame_w), dtype=bool)
    bg_union = np.zeros_like(fg_union)
    for pl in placements:
        fp = placement_footprint(pl, sprites[pl.sprite_id], fg_rect, frame_w, frame_h)
        if pl.region == FG:
            fg_union |= fp
        else:
            bg_union |= fp
    fg_area = fg_rect.area
    bg_area = frame_w * frame_h - fg_area
    fg = np.count_nonzero(fg_union) / fg_area
    bg = np.count_nonzero(bg_union) / bg_area if bg_area > 0 else 0.0
    return float(fg), float(bg)


def plan_severity(plan: OcclusionPlan, sprites: Dict[str, OccluderSprite]) -> Dict[int, Tuple[float, float]]:
    return {
        t: frame_severity(plan.placements_at(t), sprites, plan.fg_rect, plan.frame_width, plan.frame_height)
        for t in range(plan.frame_count)
    }


# -- severity loop -------------------------------------------------------------------


def _video_fg(video: VideoRecord) -> Tuple[Rect, bool]:
    if not video.tubes:
        raise EmptyRegion(f"video {video.video_id!r} has no ground-truth tubes to define an actor region")
    return actor_region_for_tubes(video.tubes), len(video.tubes) > 1


def _check_level(level: int) -> int:
    if level not in SEVERITY_BANDS:
        raise ValueError(f"severity level must be 1, 2 or 3, got {level!r}")
    return level


def _sample_center(rng, region: RegionSpec, size: Tuple[int, int], wrap: bool) -> Tuple[float, float]:
    rect = region.bounding_rect
    if wrap:
        return float(rng.uniform(rect.x_min, rect.x_max)), float(rng.uniform(rect.y_min, rect.y_max))
    sw, sh = size
    # keep the whole sprite inside the region's bounding rect
    x = rng.uniform(rect.x_min + sw / 2.0, max(rect.x_max - sw / 2.0, rect.x_min + sw / 2.0))
    y = rng.uniform(rect.y_min + sh / 2.0, max(rect.y_max - sh / 2.0, rect.y_min + sh / 2.0))
    return float(x), float(y)


def _fill_region(region: RegionSpec, level: int, occluders: OccluderSet, rng, wrap: bool, min_scale: float, budget: int):
    """Add occluders until the region's union footprint fraction hits the level's target.

    Returns ``(placements, fraction, iterations_used)``; raises
    SeverityUnreachable when ``budget`` iterations do not suffice.
    """
    area = region_area(region)
    if area <= 0:
        raise EmptyRegion(f"{region.kind} region is empty")
    lo, hi = _TARGETS[level]
    mid = 0.5 * (lo + hi)
    W, H = region.frame_width, region.frame_height
    clip = region.mask()
    wrap_rect = region.bounding_rect if wrap else None
    union = np.zeros((H, W), dtype=bool)
    covered = 0
    placed = []
    for it in range(budget):
        frac = covered / area
        if lo <= frac <= hi:
            return placed, frac, it
        sprite = occluders.choose(rng)
        try:
            scale = fit_scale_for_budget(sprite, region, (lo - frac, hi - frac))
        except Unfittable:
            continue
        if scale < min_scale:
            continue
        scaled = scale_sprite(sprite, scale)
        best = None
        for _ in range(_CANDIDATES):
            center = _sample_center(rng, region, scaled_size(sprite, scale), wrap)
            new = union | (footprint_layer(scaled, center, W, H, wrap_rect) & clip)
            n = int(np.count_nonzero(new))
            f = n / area
            if f <= hi and (best is None or abs(f - mid) < abs(best[0] - mid)):
                best = (f, n, new, center)
        if best is None:
            continue
        _, covered, union, center = best
        placed.append(Placement(sprite.sprite_id, region.kind, center, scale, wrap))
    frac = covered / area
    if lo <= frac <= hi:
        return placed, frac, budget
    raise SeverityUnreachable(
        f"{region.kind}{level}: reached {frac:.3f} of target [{lo}, {hi}] after {budget} iterations"
    )


def plan_static(
    video: VideoRecord,
    fg_level: int,
    bg_level: int,
    occluders: OccluderSet,
    seed: int,
    min_scale: float = DEFAULT_MIN_SCALE,
    max_iterations: int = MAX_ITERATIONS,
) -> OcclusionPlan:
    """Fixed occluders whose FG and BG union fractions fall in the requested bands."""
    _check_level(fg_level), _check_level(bg_level)
    fg_rect, multi = _video_fg(video)
    W, H, n = video.width, video.height, video.frame_count
    rng = counter_rng(derive_seed(seed, "static"))
    placements: List[Placement] = []
    used = 0
    for kind, level in ((FG, fg_level), (BG, bg_level)):
        region = RegionSpec(kind, fg_rect, W, H)
        pl, _, it = _fill_region(region, level, occluders, rng, False, min_scale, max_iterations - used)
        placements += pl
        used += it
    tracks = tuple(
        OccluderTrack(p.sprite_id, p.region, MotionSpec("static"), False, {t: p for t in range(n)}) for p in placements
    )
    sprites = occluders.by_id()
    sev = frame_severity(placements, sprites, fg_rect, W, H)
    return OcclusionPlan(
        video.video_id, seed, "static", W, H, n, fg_rect, (fg_level, bg_level), tracks,
        {t: sev for t in range(n)}, multi, used,
    )


def _build_track(p: Placement, motion: MotionSpec, wrap_rect: Rect, n: int) -> OccluderTrack:
    frames = {}
    for t, (pos, mult) in enumerate(trajectory(motion, p.position, n)):
        frames[t] = Placement(p.sprite_id, p.region, wrap_position(pos, wrap_rect), p.scale * mult, True)
    return OccluderTrack(p.sprite_id, p.region, motion, True, frames)


def _rescaled(track: OccluderTrack, factor: float) -> OccluderTrack:
    frames = {t: Placement(pl.sprite_id, pl.region, pl.position, pl.scale * factor, True) for t, pl in track.frames.items()}
    return OccluderTrack(track.sprite_id, track.region, track.motion, True, frames)


def plan_dynamic(
    video: VideoRecord,
    motion: MotionSpec,
    occluders: OccluderSet,
    seed: int,
    target: Tuple[int, int] = DEFAULT_DYNAMIC_TARGET,
    min_scale: float = DEFAULT_MIN_SCALE,
    max_iterations: int = MAX_ITERATIONS,
) -> OcclusionPlan:
    """Moving occluders, wrapped inside their region, whose temporal-mean severity hits ``target``."""
    if motion.kind == "static":
        raise ValueError("plan_dynamic needs a moving motion kind; use plan_static")
    check_motion_split(motion.kind, motion.split)
    fg_level, bg_level = _check_level(target[0]), _check_level(target[1])
    fg_rect, multi = _video_fg(video)
    W, H, n = video.width, video.height, video.frame_count
    sprites = occluders.by_id()
    rng = counter_rng(derive_seed(seed, "dynamic"))
    wrap_rects = {FG: fg_rect, BG: Rect(0, 0, W, H)}
    used = 0
    last = None
    while used < max_iterations:
        starts: List[Placement] = []
        try:
            for kind, level in ((FG, fg_level), (BG, bg_level)):
                region = RegionSpec(kind, fg_rect, W, H)
                pl, _, it = _fill_region(region, level, occluders, rng, True, min_scale, max_iterations - used)
                starts += pl
                used += it
        except SeverityUnreachable as exc:
            raise SeverityUnreachable(f"video {video.video_id!r}: {exc}") from None
        tracks = []
        for k, p in enumerate(starts):
            resolved = resolve_motion(motion, wrap_rects[p.region], n, derive_seed(seed, "occluder", k))
            tracks.append(_build_track(p, resolved, wrap_rects[p.region], n))
        for _ in range(_RESCALE_STEPS):
            used += 1
            per_frame = {t: frame_severity([trk.frames[t] for trk in tracks], sprites, fg_rect, W, H) for t in range(n)}
            means = np.mean(np.array(list(per_frame.values())), axis=0)
            last = means
            off = []
            for col, (kind, level) in enumerate(((FG, fg_level), (BG, bg_level))):
                lo, hi = _TARGETS[level]
                if not lo <= means[col] <= hi:
                    off.append((kind, math.sqrt(0.5 * (lo + hi) / max(means[col], 1e-9))))
            if not off:
                return OcclusionPlan(
                    video.video_id, seed, "dynamic", W, H, n, fg_rect, (fg_level, bg_level), tuple(tracks),
                    per_frame, multi, used,
                )
            factors = dict(off)
            tracks = [_rescaled(trk, factors[trk.region]) if trk.region in factors else trk for trk in tracks]
            if used >= max_iterations:
                break
        log.debug("video %s: dynamic attempt missed target (means %s), resampling", video.video_id, last)
    raise SeverityUnreachable(
        f"video {video.video_id!r}: temporal-mean severity {last} missed FG{fg_level}/BG{bg_level} "
        f"after {max_iterations} iterations"
    )
