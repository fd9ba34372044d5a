"""Batch workflows behind the command line: generate, evaluate, report."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .compositor import read_frame, render_plan, severity_csv, write_frame
from .errors import OccBenchError
from .metrics import EvalReport, evaluate, robustness_table, round2
from .model import DatasetManifest, VideoRecord, load_frame_detections, load_predictions, parse_manifest
from .occluders import load_library
from .regions import SEVERITY_BANDS
from .seeding import check_seed, derive_seed
from .trajectory import MotionSpec, dump_plan, plan_dynamic, plan_static

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    manifest_path: str
    occluder_dir: str
    output_dir: str
    fg_level: int = 2
    bg_level: int = 3
    motion: str = "static"
    split: Optional[str] = None
    seed: int = 0
    workers: int = 1
    strict: bool = False
    category: str = "all"

    @property
    def mode(self) -> str:
        return "static" if self.motion == "static" else "dynamic"

    def validate(self) -> MotionSpec:
        for name in ("fg_level", "bg_level"):
            if getattr(self, name) not in SEVERITY_BANDS:
                raise ValueError(f"{name} must be 1, 2 or 3, got {getattr(self, name)!r}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        check_seed(self.seed)
        return MotionSpec(self.motion, split=self.split)


@dataclass
class GenerateResult:
    exit_code: int
    videos: List[dict] = field(default_factory=list)
    errors: List[dict] = field(default_factory=list)

    def summary(self) -> dict:
        fg = [v["mean_fg_fraction"] for v in self.videos]
        bg = [v["mean_bg_fraction"] for v in self.videos]
        return {
            "videos_processed": len(self.videos),
            "videos_failed": len(self.errors),
            "mean_fg_fraction": float(np.mean(fg)) if fg else None,
            "mean_bg_fraction": float(np.mean(bg)) if bg else None,
            "videos": self.videos,
            "errors": self.errors,
        }


def _mirror(path: str) -> Path:
    p = Path(path)
    return p.relative_to(p.anchor) if p.is_absolute() else p


def _error_entry(exc: Exception, video_id: Optional[str] = None) -> dict:
    entry = exc.to_dict() if isinstance(exc, OccBenchError) else {"error": type(exc).__name__, "message": str(exc)}
    if video_id is not None:
        entry["video_id"] = video_id
    return entry


_LIBRARY_CACHE: Dict[tuple, object] = {}


def _library(occluder_dir: str, category: str):
    key = (str(Path(occluder_dir).resolve()), category)
    if key not in _LIBRARY_CACHE:
        _LIBRARY_CACHE[key] = load_library(occluder_dir, category)
    return _LIBRARY_CACHE[key]


def generate_video(video: VideoRecord, config: RunConfig, frame_root: str) -> dict:
    """Plan, render and write one video; returns its summary row."""
    occluders = _library(config.occluder_dir, config.category)
    seed = derive_seed(config.seed, video.video_id)
    if config.mode == "static":
        plan = plan_static(video, config.fg_level, config.bg_level, occluders, seed)
    else:
        motion = MotionSpec(config.motion, split=config.split)
        plan = plan_dynamic(video, motion, occluders, seed, target=(config.fg_level, config.bg_level))
    frames = [read_frame(Path(frame_root) / video.frame_path(t)) for t in range(video.frame_count)]
    result = render_plan(frames, plan, occluders)
    out = Path(config.output_dir)
    for t, frame in enumerate(result.frames):
        write_frame(out / _mirror(video.frame_path(t)), frame)
    vdir = out / "plans" / video.video_id
    vdir.mkdir(parents=True, exist_ok=True)
    (vdir / "plan.json").write_bytes(dump_plan(plan))
    (vdir / "severity.csv").write_text(severity_csv(result.realized_severity))
    fg, bg = np.mean(np.array(list(result.realized_severity.values())), axis=0)
    return {
        "video_id": video.video_id,
        "seed": seed,
        "occluders": len(plan.occluders),
        "mean_fg_fraction": float(fg),
        "mean_bg_fraction": float(bg),
        "fg_multi_actor": plan.multi_actor,
        "severity_drift": result.max_severity_drift(),
    }


def _job(args):
    video, config, frame_root = args
    try:
        return generate_video(video, config, frame_root)
    except Exception as exc:  # reported per video; the batch decides whether to abort
        log.debug("video %s failed", video.video_id, exc_info=True)
        return {"__error__": _error_entry(exc, video.video_id)}


def run_generate(config: RunConfig) -> GenerateResult:
    try:
        config.validate()
        manifest_path = Path(config.manifest_path)
        manifest = parse_manifest(manifest_path.read_bytes())
        _library(config.occluder_dir, config.category)
    except (OccBenchError, OSError, ValueError) as exc:
        return GenerateResult(2, errors=[_error_entry(exc)])

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    frame_root = str(manifest_path.parent)
    jobs = [(v, config, frame_root) for v in manifest.videos]
    result = GenerateResult(0)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_job, jobs))
    else:
        rows = []
        for job in jobs:
            rows.append(_job(job))
            if config.strict and "__error__" in rows[-1]:
                break
    for row in rows:
        if "__error__" in row:
            result.errors.append(row["__error__"])
            log.warning("video %s: %s", row["__error__"].get("video_id"), row["__error__"]["message"])
        else:
            result.videos.append(row)
    result.videos.sort(key=lambda r: r["video_id"])
    result.errors.sort(key=lambda r: r.get("video_id") or "")
    if result.errors and config.strict:
        result.exit_code = 1
    (out / "manifest.json").write_bytes(manifest_path.read_bytes())
    (out / "summary.json").write_text(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")
    if result.errors:
        (out / "errors.json").write_text(json.dumps(result.errors, indent=2) + "\n")
    return result


# -- evaluation ------------------------------------------------------------------------


def _evaluation_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["threshold", "vmap", "fmap"])
    for tau in sorted(report.per_threshold):
        w.writerow([f"{tau:g}", f"{report.per_threshold[tau]:.2f}", f"{report.frame_per_threshold.get(tau, float('nan')):.2f}"])
    if report.kappa is not None:
        w.writerow(["kappa", f"{round2(report.kappa):.2f}", ""])
    if report.delta_a is not None:
        w.writerow(["delta_a", f"{round2(report.delta_a):.2f}", ""])
        w.writerow(["delta_r", f"{round2(report.delta_r):.2f}", ""])
    return buf.getvalue()


def run_evaluate(
    manifest_path,
    predictions_path,
    thresholds: Sequence[float] = (0.2, 0.5),
    output_dir=None,
    frame_detections_path=None,
    clean_report_path=None,
    label: str = "",
) -> EvalReport:
    manifest = parse_manifest(Path(manifest_path).read_bytes())
    preds = load_predictions(Path(predictions_path).read_bytes(), manifest)
    frame_dets = None
    if frame_detections_path is not None:
        frame_dets = load_frame_detections(Path(frame_detections_path).read_bytes(), manifest)
    clean_vmap = None
    if clean_report_path is not None:
        clean = EvalReport.from_json(json.loads(Path(clean_report_path).read_text()))
        clean_vmap = clean.per_threshold.get(0.5, clean.map)
    report = evaluate(preds, manifest, thresholds, frame_dets=frame_dets, clean_vmap=clean_vmap, label=label)
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
        (out / "report.csv").write_text(_evaluation_csv(report))
    return report


def load_report(path) -> EvalReport:
    return EvalReport.from_json(json.loads(Path(path).read_text()))


def run_report(clean_report_path, occluded_paths: Mapping[str, str], output_dir=None, tau: Optional[float] = None):
    """Robustness table of occluded reports (keyed by severity cell or motion) against a clean one."""
    clean = load_report(clean_report_path)
    occluded = {name: load_report(p) for name, p in occluded_paths.items()}
    rows = robustness_table(clean, occluded, tau)
    kappas = [("clean", clean.kappa)] + [(n, r.kappa) for n, r in occluded.items()]
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cell", "vmap", "delta_a", "delta_r"])
        for r in rows:
            w.writerow([r.cell, f"{r.vmap:.1f}", f"{round2(r.delta_a):.2f}", f"{round2(r.delta_r):.2f}"])
        for name, k in kappas:
            if k is not None:
                w.writerow([f"kappa[{name}]", f"{round2(k):.2f}", "", ""])
        (out / "robustness.csv").write_text(buf.getvalue())
        doc = {
            "threshold": clean.primary_threshold if tau is None else tau,
            "rows": [asdict(r) for r in rows],
            "kappa": {name: k for name, k in kappas if k is not None},
        }
        (out / "robustness.json").write_text(json.dumps(doc, indent=2) + "\n")
    return rows
