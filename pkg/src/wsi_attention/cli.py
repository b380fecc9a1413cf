"""Command-line entry point: wires ingestion, heatmaps, scanpaths,
metrics, prediction and rendering into reproducible runs.

Every command records its effective configuration next to its outputs so
a run can be repeated identically.
"""

from __future__ import annotations

import argparse
import dataclasses
import glob
import io
import json
import os
import sys
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from PIL import Image

from . import prediction as pred
from .errors import AspectMismatch, ToolkitError
from .heatmap import (
    DEFAULT_SCALE,
    DEFAULT_SIGMA,
    AttentionHeatmap,
    build_attention_heatmap,
    load_heatmap,
    save_heatmap,
)
from .ingest import (
    Group,
    NavigationSession,
    SlideManifest,
    TumorAnnotation,
    load_manifest,
    magnification_stats,
    parse_annotation,
    parse_session_log,
    validate_and_clip,
)
from .metrics import EvalConfig, case_report_csv, evaluate_case
from .scanpath import (
    AlignmentScoring,
    build_scanpath,
    format_grade_string,
    grade_string,
    scanpath_to_csv,
)

OUT_DIR_ENV = "WSI_ATTENTION_OUT"

# Magnification buckets used for per-level heatmaps in reports; events at
# other levels snap to the nearest bucket (ties to the lower).
REPORT_MAG_BUCKETS = (4.0, 10.0, 20.0, 40.0)


@dataclass
class RunConfig:
    scale: float = DEFAULT_SCALE
    sigma: float = DEFAULT_SIGMA
    n_bins: int = 5
    match: float = 1.0
    mismatch: float = 0.0
    gap: float = 0.0
    match_direction: str = "attention_to_tumor"
    seed: int = 0
    out_dir: str = "."

    def scoring(self) -> AlignmentScoring:
        return AlignmentScoring(self.match, self.mismatch, self.gap)

    def eval_config(self) -> EvalConfig:
        return EvalConfig(
            scale=self.scale,
            sigma=self.sigma,
            scoring=self.scoring(),
            match_direction=self.match_direction,
        )

    def to_dict(self) -> Dict:
        return dataclasses.asdict(self)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(out_dir=os.environ.get(OUT_DIR_ENV, "."))
    if getattr(args, "config", None):
        with open(args.config) as fh:
            for key, value in json.load(fh).items():
                if hasattr(cfg, key):
                    setattr(cfg, key, value)
    for key in (
        "scale",
        "sigma",
        "n_bins",
        "match",
        "mismatch",
        "gap",
        "match_direction",
        "seed",
        "out_dir",
    ):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    return cfg


# --- rendering ---------------------------------------------------------------

# 5-stop ramp for overlay mode, low to high attention.
_RAMP = np.array(
    [
        (0, 0, 255),
        (0, 255, 255),
        (0, 255, 0),
        (255, 255, 0),
        (255, 0, 0),
    ],
    dtype=np.float64,
)


def _ramp_colors(values: np.ndarray) -> np.ndarray:
    pos = np.clip(values, 0.0, 1.0) * (len(_RAMP) - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, len(_RAMP) - 1)
    frac = (pos - lo)[..., None]
    return _RAMP[lo] * (1 - frac) + _RAMP[hi] * frac


def render_heatmap(
    heatmap: AttentionHeatmap,
    mode: str = "gray",
    base_image: Optional[np.ndarray] = None,
) -> bytes:
    """Render to PNG bytes. gray: value*255 rounded half-up. overlay:
    5-stop color ramp alpha-blended (0.5) over a base image of matching
    aspect ratio."""
    values = heatmap.grid.values
    if mode == "gray":
        arr = np.floor(values * 255.0 + 0.5).astype(np.uint8)
        img = Image.fromarray(arr, mode="L")
    elif mode == "overlay":
        if base_image is None:
            raise ValueError("overlay mode requires a base image")
        bh, bw = base_image.shape[:2]
        gh, gw = values.shape
        if abs(bw / bh - gw / gh) > 0.01:
            raise AspectMismatch(
                f"base {bw}x{bh} does not match heatmap aspect {gw}x{gh}"
            )
        base = np.asarray(
            Image.fromarray(base_image).resize((gw, gh), Image.BILINEAR),
            dtype=np.float64,
        )
        blended = 0.5 * base + 0.5 * _ramp_colors(values)
        img = Image.fromarray(np.floor(blended + 0.5).astype(np.uint8), mode="RGB")
    else:
        raise ValueError(f"unknown render mode {mode!r}")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


# --- shared loading helpers --------------------------------------------------

def _load_manifest_file(path: str) -> SlideManifest:
    if not os.path.exists(path):
        raise ToolkitError(f"missing manifest file: {path}")
    with open(path, "rb") as fh:
        return load_manifest(fh)


def _load_sessions(
    paths: Sequence[str], manifest: SlideManifest
) -> List[NavigationSession]:
    sessions = []
    for path in paths:
        try:
            with open(path, "rb") as fh:
                sessions.append(validate_and_clip(parse_session_log(fh), manifest))
        except ToolkitError as exc:
            raise ToolkitError(f"{path}: {exc}") from exc
        except FileNotFoundError:
            raise ToolkitError(f"missing session file: {path}")
    return sessions


def _load_annotation_file(path: str, manifest: SlideManifest) -> TumorAnnotation:
    if not os.path.exists(path):
        raise ToolkitError(f"missing annotation file: {path}")
    with open(path, "rb") as fh:
        try:
            return parse_annotation(fh, manifest)
        except ToolkitError as exc:
            raise ToolkitError(f"{path}: {exc}") from exc


def _write_heatmap_outputs(hm: AttentionHeatmap, prefix: str) -> List[str]:
    ahm = prefix + ".ahm"
    png = prefix + ".png"
    save_heatmap(hm, ahm)
    with open(png, "wb") as fh:
        fh.write(render_heatmap(hm, "gray"))
    return [ahm, png]


def _write_metadata(out_dir: str, command: str, cfg: RunConfig, inputs: List[str]):
    config = cfg.to_dict()
    # The output location is not part of the analysis configuration and
    # would break byte-for-byte reproducibility across runs.
    config.pop("out_dir", None)
    meta = {
        "command": command,
        "config": config,
        "inputs": sorted(inputs),
    }
    with open(os.path.join(out_dir, "run_metadata.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- report ------------------------------------------------------------------

def run_report(case_dir: str, cfg: RunConfig) -> List[str]:
    """Full per-case pipeline: group and magnification heatmaps, scanpath
    exports, dwell statistics, and (with an annotation) the CC/SSS case
    report. Returns the list of files written."""
    manifest = _load_manifest_file(os.path.join(case_dir, "manifest.json"))
    session_paths = sorted(glob.glob(os.path.join(case_dir, "sessions", "*.jsonl")))
    if not session_paths:
        raise ToolkitError(f"no session logs under {case_dir}/sessions/")
    sessions = _load_sessions(session_paths, manifest)
    annotation_path = os.path.join(case_dir, "annotation.json")
    annotation = (
        _load_annotation_file(annotation_path, manifest)
        if os.path.exists(annotation_path)
        else None
    )

    out_dir = cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    written: List[str] = []

    subsets = {"all": sessions}
    gu = [s for s in sessions if s.group == Group.GU_SPECIALIST]
    gen = [s for s in sessions if s.group == Group.GENERAL]
    if gu:
        subsets["gu"] = gu
    if gen:
        subsets["general"] = gen
    for name, subset in subsets.items():
        hm = build_attention_heatmap(subset, manifest, cfg.scale, cfg.sigma)
        written += _write_heatmap_outputs(hm, os.path.join(out_dir, f"heatmap_{name}"))

    for mag in REPORT_MAG_BUCKETS:
        hm = build_attention_heatmap(
            sessions,
            manifest,
            cfg.scale,
            cfg.sigma,
            mag_filter=mag,
            mag_levels=REPORT_MAG_BUCKETS,
        )
        prefix = os.path.join(out_dir, f"heatmap_mag{int(mag)}x")
        written += _write_heatmap_outputs(hm, prefix)

    stats_lines = ["observer_id,group,mag,dwell_ms,total_ms"]
    for session in sessions:
        stats = magnification_stats(session, manifest)
        for mag in manifest.standard_mags:
            stats_lines.append(
                f"{session.observer_id},{session.group.value},{mag!r},"
                f"{stats.dwell_ms[mag]},{stats.total_ms}"
            )
        sp = build_scanpath(session)
        sp_path = os.path.join(out_dir, f"scanpath_{session.observer_id}.csv")
        with open(sp_path, "w") as fh:
            fh.write(scanpath_to_csv(sp))
        written.append(sp_path)
        if annotation is not None:
            gs_path = os.path.join(out_dir, f"grades_{session.observer_id}.txt")
            with open(gs_path, "w") as fh:
                fh.write(format_grade_string(grade_string(sp, annotation)) + "\n")
            written.append(gs_path)
    stats_path = os.path.join(out_dir, "mag_stats.csv")
    with open(stats_path, "w") as fh:
        fh.write("\n".join(stats_lines) + "\n")
    written.append(stats_path)

    if annotation is not None:
        report = evaluate_case(sessions, annotation, manifest, cfg.eval_config())
        report_path = os.path.join(out_dir, "case_report.csv")
        with open(report_path, "w") as fh:
            fh.write(case_report_csv(report))
        written.append(report_path)

    _write_metadata(out_dir, "report", cfg, [case_dir] + session_paths)
    written.append(os.path.join(out_dir, "run_metadata.json"))
    return written


# --- subcommand handlers -----------------------------------------------------

def _cmd_ingest(args) -> int:
    manifest = _load_manifest_file(args.manifest)
    for path in args.sessions:
        session = _load_sessions([path], manifest)[0]
        stats = magnification_stats(session, manifest)
        print(
            f"{path}: observer={session.observer_id} group={session.group.value} "
            f"events={len(session.events)} total_ms={stats.total_ms}"
        )
        for mag in manifest.standard_mags:
            print(f"  {mag:g}X: {stats.dwell_ms[mag]} ms")
    return 0


def _cmd_heatmap(args, cfg: RunConfig) -> int:
    manifest = _load_manifest_file(args.manifest)
    sessions = _load_sessions(args.sessions, manifest)
    hm = build_attention_heatmap(
        sessions,
        manifest,
        cfg.scale,
        cfg.sigma,
        mag_filter=args.mag_filter,
        mag_levels=REPORT_MAG_BUCKETS if args.mag_filter is not None else None,
    )
    os.makedirs(os.path.dirname(args.out_prefix) or ".", exist_ok=True)
    for path in _write_heatmap_outputs(hm, args.out_prefix):
        print(f"wrote {path}")
    return 0


def _cmd_scanpath(args, cfg: RunConfig) -> int:
    manifest = _load_manifest_file(args.manifest)
    session = _load_sessions([args.session], manifest)[0]
    sp = build_scanpath(session)
    os.makedirs(os.path.dirname(args.out_prefix) or ".", exist_ok=True)
    csv_path = args.out_prefix + ".csv"
    with open(csv_path, "w") as fh:
        fh.write(scanpath_to_csv(sp))
    print(f"wrote {csv_path}")
    if args.annotation:
        annotation = _load_annotation_file(args.annotation, manifest)
        gs_path = args.out_prefix + ".grades.txt"
        with open(gs_path, "w") as fh:
            fh.write(format_grade_string(grade_string(sp, annotation)) + "\n")
        print(f"wrote {gs_path}")
    return 0


def _cmd_compare(args, cfg: RunConfig) -> int:
    manifest = _load_manifest_file(args.manifest)
    sessions = _load_sessions(args.sessions, manifest)
    annotation = _load_annotation_file(args.annotation, manifest)
    report = evaluate_case(sessions, annotation, manifest, cfg.eval_config())
    text = case_report_csv(report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _load_patch_rasters(patch_manifest: str):
    base = os.path.dirname(os.path.abspath(patch_manifest))
    with open(patch_manifest) as fh:
        rows = pred.read_patch_manifest(fh.read())
    rasters = {}
    for _, px, py, path in rows:
        full = path if os.path.isabs(path) else os.path.join(base, path)
        rasters[(px, py)] = np.asarray(Image.open(full).convert("RGB"))
    return rasters


def _cmd_predict_train(args, cfg: RunConfig) -> int:
    manifest = _load_manifest_file(args.manifest)
    heatmap = load_heatmap(args.heatmap)
    spec = pred.BinSpec.equal_width(cfg.n_bins)
    patches = pred.extract_patch_grid(manifest, args.patch_size, args.mag)
    rasters = _load_patch_rasters(args.patch_manifest)
    kept = []
    for p in patches:
        raster = rasters.get((p.px, p.py))
        if raster is None:
            raise ToolkitError(f"patch manifest missing raster for ({p.px}, {p.py})")
        p.features = pred.patch_features(
            pred.pad_patch_raster(raster, args.patch_size)
        )
        p.label = pred.patch_label(heatmap, p, spec)
        kept.append(p)
    hyper = pred.TrainConfig(
        lr=args.lr, epochs=args.epochs, seed=cfg.seed, augment=args.augment
    )
    model = pred.train_patch_classifier(kept, hyper, spec)
    pred.save_classifier(model, args.model_out)
    print(f"wrote {args.model_out}")
    return 0


def _cmd_predict_run(args, cfg: RunConfig) -> int:
    manifest = _load_manifest_file(args.manifest)
    spec = pred.BinSpec.equal_width(cfg.n_bins)
    patches = pred.extract_patch_grid(manifest, args.patch_size, args.mag)
    if args.predictions:
        with open(args.predictions) as fh:
            predictions = pred.import_predictions(fh.read(), cfg.n_bins)
        hm = pred.predict_and_reassemble(
            predictions, patches, manifest, spec, cfg.scale, cfg.sigma
        )
    else:
        if not (args.model and args.patch_manifest):
            raise ToolkitError("predict-run needs --predictions or --model with --patch-manifest")
        model = pred.load_classifier(args.model)
        rasters = _load_patch_rasters(args.patch_manifest)
        for p in patches:
            raster = rasters.get((p.px, p.py))
            if raster is None:
                raise ToolkitError(f"patch manifest missing raster for ({p.px}, {p.py})")
            p.features = pred.patch_features(
                pred.pad_patch_raster(raster, args.patch_size)
            )
        hm = pred.predict_and_reassemble(
            model, patches, manifest, model.binspec, cfg.scale, cfg.sigma
        )
    os.makedirs(os.path.dirname(args.out_prefix) or ".", exist_ok=True)
    for path in _write_heatmap_outputs(hm, args.out_prefix):
        print(f"wrote {path}")
    return 0


def _cmd_report(args, cfg: RunConfig) -> int:
    for path in run_report(args.case_dir, cfg):
        print(f"wrote {path}")
    return 0


def _cmd_render(args) -> int:
    hm = load_heatmap(args.heatmap)
    base = None
    if args.base:
        base = np.asarray(Image.open(args.base).convert("RGB"))
    png = render_heatmap(hm, args.mode, base)
    with open(args.out, "wb") as fh:
        fh.write(png)
    print(f"wrote {args.out}")
    return 0


# --- argument parsing --------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--scale", type=float, help="grid cells per base pixel (default 1/16)")
    p.add_argument("--sigma", type=float, help="Gaussian sigma in grid cells (default 16)")
    p.add_argument("--n-bins", dest="n_bins", type=int, help="intensity bins (default 5)")
    p.add_argument("--match", type=float, help="alignment match score (default 1)")
    p.add_argument("--mismatch", type=float, help="alignment mismatch score (default 0)")
    p.add_argument("--gap", type=float, help="alignment gap score (default 0)")
    p.add_argument(
        "--match-direction",
        dest="match_direction",
        choices=["attention_to_tumor", "tumor_to_attention"],
        help="histogram matching direction for CC",
    )
    p.add_argument("--seed", type=int, help="RNG seed for training")
    p.add_argument(
        "--out-dir",
        dest="out_dir",
        help=f"output directory (default $" + OUT_DIR_ENV + " or .)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wsi-attention",
        description="Reconstruct, evaluate and predict pathologist visual "
        "attention from slide-navigation viewport logs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate session logs and print dwell stats")
    p.add_argument("manifest")
    p.add_argument("sessions", nargs="+")

    p = sub.add_parser("heatmap", help="build an attention heatmap")
    p.add_argument("manifest")
    p.add_argument("sessions", nargs="+")
    p.add_argument("--mag-filter", dest="mag_filter", type=float)
    p.add_argument("--out-prefix", dest="out_prefix", default="heatmap")
    _add_config_flags(p)

    p = sub.add_parser("scanpath", help="export a scanpath CSV (and grade string)")
    p.add_argument("manifest")
    p.add_argument("session")
    p.add_argument("--annotation")
    p.add_argument("--out-prefix", dest="out_prefix", default="scanpath")
    _add_config_flags(p)

    p = sub.add_parser("compare", help="CC/SSS case report for a set of sessions")
    p.add_argument("manifest")
    p.add_argument("sessions", nargs="+")
    p.add_argument("--annotation", required=True)
    p.add_argument("--out")
    _add_config_flags(p)

    p = sub.add_parser("predict-train", help="train the baseline patch classifier")
    p.add_argument("manifest")
    p.add_argument("--heatmap", required=True, help="ground-truth .ahm heatmap")
    p.add_argument("--patch-manifest", dest="patch_manifest", required=True)
    p.add_argument("--model-out", dest="model_out", required=True)
    p.add_argument("--patch-size", dest="patch_size", type=int, default=500)
    p.add_argument("--mag", type=float, default=10.0)
    p.add_argument("--lr", type=float, default=0.005)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--augment", action="store_true")
    _add_config_flags(p)

    p = sub.add_parser("predict-run", help="predict and reassemble a heatmap")
    p.add_argument("manifest")
    p.add_argument("--model")
    p.add_argument("--patch-manifest", dest="patch_manifest")
    p.add_argument("--predictions", help="imported px,py,bin CSV")
    p.add_argument("--patch-size", dest="patch_size", type=int, default=500)
    p.add_argument("--mag", type=float, default=10.0)
    p.add_argument("--out-prefix", dest="out_prefix", default="predicted")
    _add_config_flags(p)

    p = sub.add_parser("report", help="full pipeline over a case directory")
    p.add_argument("case_dir")
    _add_config_flags(p)

    p = sub.add_parser("render", help="render a .ahm heatmap to PNG")
    p.add_argument("heatmap")
    p.add_argument("--mode", choices=["gray", "overlay"], default="gray")
    p.add_argument("--base", help="base image for overlay mode")
    p.add_argument("--out", required=True)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "ingest":
            return _cmd_ingest(args)
        if args.command == "render":
            return _cmd_render(args)
        cfg = config_from_args(args)
        if args.command == "heatmap":
            return _cmd_heatmap(args, cfg)
        if args.command == "scanpath":
            return _cmd_scanpath(args, cfg)
        if args.command == "compare":
            return _cmd_compare(args, cfg)
        if args.command == "predict-train":
            return _cmd_predict_train(args, cfg)
        if args.command == "predict-run":
            return _cmd_predict_run(args, cfg)
        if args.command == "report":
            return _cmd_report(args, cfg)
        raise ToolkitError(f"unknown command {args.command!r}")
    except (ToolkitError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
