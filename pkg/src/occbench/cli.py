"""``occbench`` command line.

Subcommands: import-occluders, generate, evaluate, report, mask-demo, plus the
helpers toy and perfect-predictions.  Set OCCBENCH_LOG to change the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import OccBenchError
from .masking import MaskConfig, TokenSequence, apply_token_mask, bernoulli_mask
from .model import dump_predictions, manifest_as_predictions, parse_manifest
from .occluders import import_directory
from .pipeline import RunConfig, run_evaluate, run_generate, run_report
from .seeding import counter_rng
from .toy import write_toy_dataset

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("occbench")

MOTIONS = ("static", "linear", "circle", "sinusoid", "zoom-in", "zoom-out", "random")

# generate options that may come from --config; value is the built-in default
GENERATE_DEFAULTS = {
    "manifest": None,
    "occluders": None,
    "out": None,
    "fg": 2,
    "bg": 3,
    "motion": "static",
    "split": None,
    "seed": 0,
    "workers": 1,
    "strict": False,
    "category": "all",
}


def _fail(exc: Exception, code: int = 2) -> int:
    entry = exc.to_dict() if isinstance(exc, OccBenchError) else {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps({"errors": [entry]}), file=sys.stderr)
    return code


def _taus(text: str):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated thresholds, got {text!r}") from None


def load_config(path) -> dict:
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix.lower() == ".toml":
        data = tomllib.loads(raw.decode("utf-8"))
    else:
        data = json.loads(raw)
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - set(GENERATE_DEFAULTS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return data


def cmd_generate(args) -> int:
    try:
        merged = dict(GENERATE_DEFAULTS)
        if args.config:
            merged.update(load_config(args.config))
        merged.update({k: v for k, v in vars(args).items() if k in GENERATE_DEFAULTS and v is not None})
        missing = [k for k in ("manifest", "occluders", "out") if not merged[k]]
        if missing:
            raise ValueError(f"missing required options: {', '.join('--' + m for m in missing)}")
        config = RunConfig(
            manifest_path=str(merged["manifest"]),
            occluder_dir=str(merged["occluders"]),
            output_dir=str(merged["out"]),
            fg_level=int(merged["fg"]),
            bg_level=int(merged["bg"]),
            motion=str(merged["motion"]).replace("-", "_"),
            split=merged["split"],
            seed=int(merged["seed"]),
            workers=int(merged["workers"]),
            strict=bool(merged["strict"]),
            category=merged["category"],
        )
    except (OSError, ValueError) as exc:
        return _fail(exc)
    result = run_generate(config)
    if result.exit_code == 2:
        print(json.dumps({"errors": result.errors}), file=sys.stderr)
        return 2
    summary = result.summary()
    print(
        f"videos processed: {summary['videos_processed']}, failed: {summary['videos_failed']}, "
        f"mean FG fraction: {summary['mean_fg_fraction']}, mean BG fraction: {summary['mean_bg_fraction']}"
    )
    if result.errors:
        print(json.dumps({"errors": result.errors}), file=sys.stderr)
    return result.exit_code


def cmd_evaluate(args) -> int:
    try:
        report = run_evaluate(
            args.manifest, args.predictions, args.iou, args.out,
            frame_detections_path=args.frame_detections, clean_report_path=args.clean_report, label=args.label,
        )
    except (OccBenchError, OSError, ValueError) as exc:
        return _fail(exc)
    for tau in sorted(report.per_threshold):
        print(f"v-mAP@{tau:g} = {report.per_threshold[tau]:.2f}   f-mAP@{tau:g} = {report.frame_per_threshold[tau]:.2f}")
    if report.kappa is not None:
        print(f"kappa = {report.kappa:.4f}")
    return 0


def _cells(items):
    out = {}
    for item in items or ():
        name, sep, path = item.partition("=")
        if not sep:
            raise ValueError(f"--cell expects LABEL=PATH, got {item!r}")
        out[name] = path
    return out


def cmd_report(args) -> int:
    try:
        rows = run_report(args.clean, _cells(args.cell), args.out, args.iou)
    except (OccBenchError, OSError, ValueError) as exc:
        return _fail(exc)
    for r in rows:
        print(f"{r.cell:10s} {r.vmap:6.1f} {r.delta_a:5.2f} {r.delta_r:5.2f}")
    return 0


def cmd_import(args) -> int:
    try:
        sprites = import_directory(args.dir, args.category, args.occluders)
    except (OccBenchError, OSError, ValueError) as exc:
        return _fail(exc)
    print(f"imported {len(sprites)} {args.category} occluders into {args.occluders}")
    return 0


def _read_sequence(path: Path) -> np.ndarray:
    if path.suffix == ".npy":
        return np.load(path)
    return np.loadtxt(path, delimiter="," if path.suffix == ".csv" else None, ndmin=2)


def cmd_mask_demo(args) -> int:
    try:
        config = MaskConfig(args.p, args.seed)
        if args.input:
            values = _read_sequence(Path(args.input))
            if args.l is not None and values.shape[0] != args.l or args.d is not None and values.shape[1] != args.d:
                raise ValueError(f"input has shape {values.shape}, expected ({args.l}, {args.d})")
        else:
            if args.l is None or args.d is None:
                raise ValueError("--l and --d are required without --input")
            values = counter_rng(args.seed).standard_normal((args.l, args.d))
        seq = TokenSequence(values)
        mask = bernoulli_mask(seq.L, config)
        masked = apply_token_mask(seq, mask)
    except (OccBenchError, OSError, ValueError) as exc:
        return _fail(exc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "masked.csv", masked, delimiter=",", fmt="%.17g")
    np.savetxt(out / "mask.csv", mask[None, :], delimiter=",", fmt="%d")
    print(f"masked {int((mask == 0).sum())} of {seq.L} tokens (p={args.p})")
    return 0


def cmd_toy(args) -> int:
    manifest, occ = write_toy_dataset(args.out, args.videos, args.frames, args.width, args.height, args.seed)
    print(f"wrote {manifest} and {occ}")
    return 0


def cmd_perfect(args) -> int:
    try:
        manifest = parse_manifest(Path(args.manifest).read_bytes())
    except (OccBenchError, OSError) as exc:
        return _fail(exc)
    Path(args.out).write_bytes(dump_predictions(manifest_as_predictions(manifest, args.score), manifest.dataset_id))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="occbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("import-occluders", help="import RGBA sprites into an occluder library")
    p.add_argument("--dir", required=True, help="directory of RGBA images")
    p.add_argument("--category", required=True, choices=("indoor", "outdoor"))
    p.add_argument("--occluders", default="occluders", help="library directory to write into")
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("generate", help="synthesize occluded frames for every video of a manifest")
    p.add_argument("--config", help="TOML or JSON file with generate options")
    p.add_argument("--manifest")
    p.add_argument("--occluders")
    p.add_argument("--out")
    p.add_argument("--fg", type=int, choices=(1, 2, 3))
    p.add_argument("--bg", type=int, choices=(1, 2, 3))
    p.add_argument("--motion", choices=MOTIONS)
    p.add_argument("--split", choices=("train", "test"))
    p.add_argument("--category", choices=("indoor", "outdoor", "all"))
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--strict", action="store_true", default=None, help="abort on the first failing video")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="v-mAP / f-mAP of predictions against a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--iou", type=_taus, default=[0.2, 0.5], help="comma-separated IoU thresholds")
    p.add_argument("--out")
    p.add_argument("--frame-detections", help="native per-frame detections for f-mAP")
    p.add_argument("--clean-report", help="report.json of the clean run, for delta_a / delta_r")
    p.add_argument("--label", default="")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="robustness table from a clean and several occluded reports")
    p.add_argument("--clean", required=True)
    p.add_argument("--cell", action="append", metavar="LABEL=PATH", help="e.g. FG2BG3=out/r.json or circle=...")
    p.add_argument("--out")
    p.add_argument("--iou", type=float, default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("mask-demo", help="apply Bernoulli token masking to an L x D sequence")
    p.add_argument("--l", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input", help=".npy, .csv or whitespace-delimited text")
    p.add_argument("--out", default="mask-demo")
    p.set_defaults(func=cmd_mask_demo)

    p = sub.add_parser("toy", help="write a small synthetic dataset and occluder library")
    p.add_argument("--out", required=True)
    p.add_argument("--videos", type=int, default=2)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=240)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("perfect-predictions", help="write ground truth as a prediction file")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--score", type=float, default=1.0)
    p.set_defaults(func=cmd_perfect)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("OCCBENCH_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
