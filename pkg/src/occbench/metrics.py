"""Localization metrics and robustness summaries.

``video_map`` matches prediction tubes to ground-truth tubes by spatio-temporal
IoU; ``frame_map`` matches per-frame boxes.  Both use greedy matching in
descending score order and all-point (precision envelope) AP.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import MismatchedThresholds, NoGroundTruth, ZeroCleanBaseline, ZeroDenominator
from .model import ActionTube, BoundingBox, DatasetManifest, FrameDetection

log = logging.getLogger(__name__)

KAPPA_THRESHOLDS = (0.2, 0.5)


# -- overlap -------------------------------------------------------------------


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def temporal_iou(pred: ActionTube, gt: ActionTube) -> float:
    tp, tg = set(pred.frames), set(gt.frames)
    return len(tp & tg) / len(tp | tg)


def st_iou(pred: ActionTube, gt: ActionTube) -> float:
    """Temporal IoU of the frame supports times the mean box IoU on shared frames."""
    shared = sorted(set(pred.frames) & set(gt.frames))
    if not shared:
        return 0.0
    union = len(set(pred.frames) | set(gt.frames))
    spatial = math.fsum(box_iou(pred.frames[t], gt.frames[t]) for t in shared) / len(shared)
    return len(shared) / union * spatial


# -- AP ------------------------------------------------------------------------


def average_precision(ranked: Sequence[Tuple[float, bool]], n_gt: int) -> float:
    """All-point AP: area under the monotone precision envelope over recall."""
    if n_gt < 1:
        raise NoGroundTruth("average precision needs at least one ground-truth instance")
    if not ranked:
        return 0.0
    scores = np.array([s for s, _ in ranked], dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("detection scores must be finite")
    order = np.argsort(-scores, kind="stable")
    tp = np.array([bool(ranked[i][1]) for i in order], dtype=np.float64)
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(1.0 - tp)
    recall = tp_cum / n_gt
    precision = tp_cum / (tp_cum + fp_cum)
    mrec = np.concatenate(([0.0], recall))
    mpre = np.concatenate(([0.0], precision))
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


@dataclass(frozen=True)
class _Det:
    score: float
    key: tuple  # matching scope, e.g. (video_id,) or (video_id, frame)
    obj: object


def greedy_match(
    dets: Sequence[_Det],
    gts: Mapping[tuple, Sequence[Tuple[str, object]]],
    similarity: Callable[[object, object], float],
    tau: float,
) -> List[Tuple[float, bool]]:
    """Mark each detection TP/FP, highest score first (ties keep input order).

    A detection claims the unmatched ground truth in its scope with the highest
    similarity (ties go to the lowest gt id) when that similarity is >= ``tau``.
    """
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    taken = set()
    out = []
    for i in order:
        d = dets[i]
        best, best_sim = None, -1.0
        for gid, g in sorted(gts.get(d.key, ()), key=lambda x: x[0]):
            if (d.key, gid) in taken:
                continue
            s = similarity(d.obj, g)
            if s > best_sim:
                best, best_sim = gid, s
        hit = best is not None and best_sim >= tau
        if hit:
            taken.add((d.key, best))
        out.append((d.score, hit))
    return out


def _mean_ap(per_class: Dict[str, float]) -> float:
    if not per_class:
        raise NoGroundTruth("no class has a ground-truth instance")
    return 100.0 * math.fsum(per_class.values()) / len(per_class)


def _check_tau(tau: float) -> float:
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"IoU threshold must lie in (0, 1], got {tau}")
    return tau


def _gt_groups(gts) -> Dict[str, List[ActionTube]]:
    if isinstance(gts, DatasetManifest):
        return {v.video_id: list(v.tubes) for v in gts.videos}
    return {vid: list(tubes) for vid, tubes in gts.items()}


def video_ap_per_class(preds: Mapping[str, Sequence[ActionTube]], gts, tau: float) -> Dict[str, float]:
    """Per-class tube AP for every class with at least one ground-truth tube."""
    _check_tau(tau)
    gts = _gt_groups(gts)
    gt_by_class: Dict[str, Dict[tuple, list]] = defaultdict(lambda: defaultdict(list))
    n_gt: Dict[str, int] = defaultdict(int)
    for vid, tubes in gts.items():
        for t in tubes:
            gt_by_class[t.class_label][(vid,)].append((t.tube_id, t))
            n_gt[t.class_label] += 1
    dets_by_class: Dict[str, List[_Det]] = defaultdict(list)
    for vid, tubes in preds.items():
        for t in tubes:
            dets_by_class[t.class_label].append(_Det(t.score, (vid,), t))
    return {
        c: average_precision(greedy_match(dets_by_class.get(c, []), gt_by_class[c], st_iou, tau), n_gt[c])
        for c in sorted(n_gt)
    }


def video_map(preds: Mapping[str, Sequence[ActionTube]], gts, tau: float = 0.5) -> float:
    """Video-level mAP (percentage) at spatio-temporal IoU threshold ``tau``."""
    return _mean_ap(video_ap_per_class(preds, gts, tau))


def flatten_tubes(preds: Mapping[str, Sequence[ActionTube]]) -> List[FrameDetection]:
    """Per-frame detections carrying their tube's score."""
    return [
        FrameDetection(vid, t, tube.class_label, box, tube.score)
        for vid, tubes in preds.items()
        for tube in tubes
        for t, box in tube.boxes()
    ]


def frame_ap_per_class(dets: Sequence[FrameDetection], gts, tau: float) -> Dict[str, float]:
    _check_tau(tau)
    gts = _gt_groups(gts)
    gt_by_class: Dict[str, Dict[tuple, list]] = defaultdict(lambda: defaultdict(list))
    n_gt: Dict[str, int] = defaultdict(int)
    for vid, tubes in gts.items():
        for tube in tubes:
            for t, box in tube.boxes():
                gt_by_class[tube.class_label][(vid, t)].append((tube.tube_id, box))
                n_gt[tube.class_label] += 1
    dets_by_class: Dict[str, List[_Det]] = defaultdict(list)
    for d in dets:
        dets_by_class[d.class_label].append(_Det(d.score, (d.video_id, d.frame_index), d.box))
    return {
        c: average_precision(greedy_match(dets_by_class.get(c, []), gt_by_class[c], box_iou, tau), n_gt[c])
        for c in sorted(n_gt)
    }


def frame_map(dets: Sequence[FrameDetection], gts, tau: float = 0.5) -> float:
    """Frame-level mAP (percentage) at box IoU threshold ``tau``."""
    return _mean_ap(frame_ap_per_class(dets, gts, tau))


# -- robustness ------------------------------------------------------------------


def _dec(x: float) -> Decimal:
    return Decimal(repr(float(x)))


def round2(x: float) -> float:
    """Two-decimal rounding, half away from zero on the decimal repr (as in report tables)."""
    return float(_dec(x).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class RobustnessInput:
    V: float
    V_prime: float

    def __post_init__(self):
        for name, v in (("V", self.V), ("V_prime", self.V_prime)):
            if not 0.0 <= v <= 100.0:
                raise ValueError(f"{name} must be a percentage in [0, 100], got {v}")


def robustness_deltas(inp: RobustnessInput) -> Tuple[float, float]:
    """Absolute and relative robustness ``(1 - (V - V')/100, 1 - (V - V')/V)``."""
    if inp.V <= 0:
        raise ZeroCleanBaseline("relative robustness is undefined for a zero clean score")
    drop = _dec(inp.V) - _dec(inp.V_prime)
    delta_a = 1 - drop / 100
    delta_r = 1 - drop / _dec(inp.V)
    return float(delta_a), float(delta_r)


def kappa(vmap_02: float, vmap_05: float) -> float:
    """Share of v-mAP kept when the threshold tightens from 0.2 to 0.5 IoU."""
    if vmap_02 <= 0:
        raise ZeroDenominator("kappa is undefined when v-mAP at 0.2 is zero")
    if vmap_05 > vmap_02:
        log.warning("v-mAP@0.5 (%s) exceeds v-mAP@0.2 (%s); kappa > 1", vmap_05, vmap_02)
    return float(1 - (_dec(vmap_02) - _dec(vmap_05)) / _dec(vmap_02))


# -- reports -----------------------------------------------------------------------


@dataclass
class EvalReport:
    """Result of one evaluation run. ``map`` is the v-mAP at ``primary_threshold``."""

    per_class_ap: Dict[str, float]
    map: float
    per_threshold: Dict[float, float]
    frame_per_threshold: Dict[float, float] = field(default_factory=dict)
    kappa: Optional[float] = None
    delta_a: Optional[float] = None
    delta_r: Optional[float] = None
    primary_threshold: float = 0.5
    fmap_source: str = "flattened_tubes"
    label: str = ""

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "primary_threshold": self.primary_threshold,
            "per_class_ap": self.per_class_ap,
            "vmap": self.map,
            "per_threshold": {_tau_key(t): v for t, v in sorted(self.per_threshold.items())},
            "frame_per_threshold": {_tau_key(t): v for t, v in sorted(self.frame_per_threshold.items())},
            "fmap_source": self.fmap_source,
            "kappa": self.kappa,
            "delta_a": self.delta_a,
            "delta_r": self.delta_r,
        }

    @classmethod
    def from_json(cls, d: dict) -> "EvalReport":
        return cls(
            per_class_ap=dict(d["per_class_ap"]),
            map=d["vmap"],
            per_threshold={float(k): v for k, v in d["per_threshold"].items()},
            frame_per_threshold={float(k): v for k, v in d.get("frame_per_threshold", {}).items()},
            kappa=d.get("kappa"),
            delta_a=d.get("delta_a"),
            delta_r=d.get("delta_r"),
            primary_threshold=float(d.get("primary_threshold", 0.5)),
            fmap_source=d.get("fmap_source", "flattened_tubes"),
            label=d.get("label", ""),
        )


def _tau_key(t: float) -> str:
    return f"{t:g}"


def evaluate(
    preds: Mapping[str, Sequence[ActionTube]],
    gts,
    thresholds: Iterable[float] = KAPPA_THRESHOLDS,
    frame_dets: Optional[Sequence[FrameDetection]] = None,
    clean_vmap: Optional[float] = None,
    primary: float = 0.5,
    label: str = "",
) -> EvalReport:
    """v-mAP (and f-mAP) at every threshold, plus kappa and, given a clean score, the deltas."""
    taus = sorted({_check_tau(float(t)) for t in thresholds} | {primary})
    per_class = {}
    per_tau = {}
    for tau in taus:
        ap = video_ap_per_class(preds, gts, tau)
        per_tau[tau] = _mean_ap(ap)
        if tau == primary:
            per_class = ap
    source = "frame_detections" if frame_dets is not None else "flattened_tubes"
    dets = list(frame_dets) if frame_dets is not None else flatten_tubes(preds)
    per_tau_frame = {tau: frame_map(dets, gts, tau) for tau in taus}
    report = EvalReport(per_class, per_tau[primary], per_tau, per_tau_frame, primary_threshold=primary,
                        fmap_source=source, label=label)
    if all(t in per_tau for t in KAPPA_THRESHOLDS) and per_tau[0.2] > 0:
        report.kappa = kappa(per_tau[0.2], per_tau[0.5])
    if clean_vmap is not None:
        report.delta_a, report.delta_r = robustness_deltas(RobustnessInput(clean_vmap, report.map))
    return report


SEVERITY_CELLS = tuple(f"FG{f}BG{b}" for f in (1, 2, 3) for b in (1, 2, 3))


@dataclass(frozen=True)
class TableRow:
    cell: str
    vmap: float
    delta_a: float
    delta_r: float


def robustness_table(clean: EvalReport, occluded: Mapping[str, EvalReport], tau: Optional[float] = None) -> List[TableRow]:
    """Per-cell rows, then FG rows averaging their BG1/2/3 cells, with deltas against ``clean``.

    Keys of ``occluded`` are severity cells (``FG2BG3``) or free-form labels
    such as motion names.
    """
    taus = set(clean.per_threshold)
    for name, rep in occluded.items():
        if set(rep.per_threshold) != taus:
            raise MismatchedThresholds(
                f"report {name!r} has thresholds {sorted(rep.per_threshold)}, clean has {sorted(taus)}"
            )
    tau = clean.primary_threshold if tau is None else tau
    if tau not in taus:
        raise MismatchedThresholds(f"threshold {tau} not present in the reports ({sorted(taus)})")
    V = clean.per_threshold[tau]

    def row(cell, v):
        da, dr = robustness_deltas(RobustnessInput(V, v))
        return TableRow(cell, v, da, dr)

    rows = [row("clean", V)]
    cells = [c for c in SEVERITY_CELLS if c in occluded]
    rows += [row(c, occluded[c].per_threshold[tau]) for c in cells]
    for f in (1, 2, 3):
        members = [occluded[c].per_threshold[tau] for c in cells if c.startswith(f"FG{f}")]
        if members:
            rows.append(row(f"FG{f}", math.fsum(members) / len(members)))
    rows += [row(name, rep.per_threshold[tau]) for name, rep in occluded.items() if name not in SEVERITY_CELLS]
    return rows
