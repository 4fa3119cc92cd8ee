"""Command-line front end.

    sarakit rank IMAGE (--saliency MAP | --builtin) [--masks DIR|LABELS.png] --out DIR
    sarakit evaluate MANIFEST.json --out DIR
    sarakit heatmap LOG... --out heat.png
    sarakit aoi LOG... --aoi MASK.png --out DIR
    sarakit stats LOG... --out table.csv

Every subcommand accepts ``--config FILE.json`` whose keys are flag names
(dashes or underscores); explicit flags win over the file. Each command
writes its resolved configuration next to its outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

from . import __version__
from .backbone import (
    image_size,
    load_depth_map,
    load_saliency_map,
    read_rgb,
    save_png,
    spectral_residual_saliency,
)
from .gaze import (
    METRIC_DIRECTIONS,
    GazeLogError,
    attention_shift_report,
    build_heatmap,
    load_aoi_png,
    load_gaze_logs,
    log_fixations,
)
from .normalize import NormalizeConfig, normalize_map
from .rank_eval import EvalConfig, evaluate_dataset, load_manifest
from .sara import GridConfig, ScoreWeights, load_masks, rank_masks, rank_overlay, rank_segments, score_grid
from .stats import DEFAULT_AGE_BINS, GENDER_COLUMNS, AGE_COLUMNS, gender_table, age_table

log = logging.getLogger("sarakit")


class CliError(Exception):
    pass


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _write_csv(path: Path, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in columns})


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return v


def _resolved(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in ("func", "config", "out", "verbose"):
            continue
        if isinstance(v, Path):
            v = str(v)
        elif isinstance(v, list):
            v = [str(x) if isinstance(x, Path) else x for x in v]
        out[k] = v
    out["version"] = __version__
    return out


def _grid_config(args) -> GridConfig:
    w_depth = args.w_depth
    if w_depth is None:
        w_depth = 1.0 if getattr(args, "depth", None) else 0.0
    args.w_depth = w_depth
    weights = ScoreWeights(args.w_entropy, args.w_saliency, args.w_center, w_depth)
    return GridConfig(args.k, weights)


def _normalize_config(args) -> NormalizeConfig | None:
    if args.no_normalize:
        return None
    return NormalizeConfig(kernel_size=args.gaussian_kernel, sigma=args.sigma_blur,
                           divisor=args.divisor)


def _add_sara_flags(p):
    g = p.add_argument_group("ranking")
    g.add_argument("--k", type=int, default=30, help="segments per grid side (default 30)")
    g.add_argument("--w-entropy", type=float, default=1.0)
    g.add_argument("--w-saliency", type=float, default=1.0)
    g.add_argument("--w-center", type=float, default=1.0)
    g.add_argument("--w-depth", type=float, default=None,
                   help="default 1 when --depth is given, else 0")
    n = p.add_argument_group("normalization")
    n.add_argument("--gaussian-kernel", type=int, default=31)
    n.add_argument("--sigma", dest="sigma_blur", type=float, default=5.0,
                   help="Gaussian sigma in pixels (default 5)")
    n.add_argument("--divisor", type=int, default=8)
    n.add_argument("--no-normalize", action="store_true", help="skip blur/quantization")


def cmd_rank(args) -> int:
    image = Path(args.image)
    if not image.exists():
        raise CliError(f"image not found: {image}")
    if bool(args.saliency) == bool(args.builtin):
        raise CliError("give exactly one of --saliency PATH or --builtin")
    if args.masks is not None and not Path(args.masks).exists():
        raise CliError(f"mask source not found: {args.masks}")
    cfg = _grid_config(args)
    ncfg = _normalize_config(args)

    rgb = read_rgb(image)
    h, w = rgb.shape[:2]
    raw = spectral_residual_saliency(rgb) if args.builtin else load_saliency_map(args.saliency, w, h)
    smap = normalize_map(raw, ncfg) if ncfg is not None else raw
    depth = load_depth_map(args.depth, w, h) if args.depth else None

    out = Path(args.out)
    result = {"config": _resolved(args), "image": {"width": w, "height": h}}
    if args.masks is not None:
        masks = load_masks(args.masks, size=(w, h))
        ranks = rank_masks(smap, cfg, masks, depth)
        result["mode"] = "masks"
        overlay = rank_overlay(rgb, ranks, masks=masks)
    else:
        ranks = rank_segments(smap, cfg, depth)
        result["mode"] = "segments"
        result["segments"] = [
            {"id": f"{s.segment_index[0]},{s.segment_index[1]}", "entropy": s.entropy,
             "mean_saliency": s.mean_saliency, "center_bias": s.center_bias,
             "depth": s.depth, "score": s.score}
            for s in score_grid(smap, cfg, depth)
        ]
        overlay = rank_overlay(rgb, ranks, cfg=cfg)
    result["ranks"] = ranks.to_records()
    _write_json(out / "ranks.json", result)
    if not args.no_overlay:
        save_png(overlay, out / "overlay.png")
        save_png(smap.to_uint8(), out / "saliency.png")
    print(f"ranked {len(ranks)} {result['mode']}; top: {ranks.entries[0].id}")
    return 0


def cmd_evaluate(args) -> int:
    manifest = Path(args.manifest)
    if not manifest.exists():
        raise CliError(f"manifest not found: {manifest}")
    items = load_manifest(manifest)
    cfg = EvalConfig(grid=_grid_config(args), normalize=_normalize_config(args),
                     backbone=args.backbone, seed=args.seed)
    res = evaluate_dataset(items, cfg)
    out = Path(args.out)
    _write_json(out / "results.json", {
        "config": _resolved(args),
        "mean_sor": res.mean_sor,
        "images_used": res.images_used,
        "mean_sauc": res.mean_sauc,
        "per_image": [
            {"image": d.image_id, "status": d.status, "sor": d.sor, "sauc": d.sauc,
             "n_masks": d.n_masks, "n_fixated": d.n_fixated, "error": d.error,
             "predicted_order": d.predicted, "ground_truth_order": d.ground_truth}
            for d in res.details
        ],
    })
    cols = ("image", "status", "sor", "sauc", "n_masks", "n_fixated", "error")
    _write_csv(out / "results.csv", cols, [
        {"image": d.image_id, "status": d.status, "sor": d.sor, "sauc": d.sauc,
         "n_masks": d.n_masks, "n_fixated": d.n_fixated, "error": d.error}
        for d in res.details
    ])
    mean = "n/a" if res.mean_sor is None else f"{res.mean_sor:.4f}"
    print(f"SOR {mean} over {res.images_used} image(s); {len(res.failed)} failed")
    for d in res.failed:
        print(f"  failed: {d.image_id}: {d.error}", file=sys.stderr)
    return 0


def _filter_logs(logs, args):
    if getattr(args, "image_id", None):
        logs = [lg for lg in logs if lg.image == args.image_id]
    if getattr(args, "group", None):
        logs = [lg for lg in logs if lg.group == args.group.upper()]
    return logs


def cmd_heatmap(args) -> int:
    logs = _filter_logs(load_gaze_logs(args.logs), args)
    width, height = args.width, args.height
    if args.image:
        width, height = image_size(args.image)
    if width is None or height is None:
        sized = [lg for lg in logs if lg.width and lg.height]
        if not sized:
            raise CliError("heatmap size unknown: pass --width/--height or --image")
        width, height = sized[0].width, sized[0].height
    points = []
    for lg in logs:
        if args.source == "fixations":
            points.extend(log_fixations(lg, args.dispersion, args.min_duration))
        else:
            points.extend(s for s in lg.samples if s.kind in args.kinds)
    heat = build_heatmap(points, width, height, args.sigma_px, args.weight)
    out = Path(args.out)
    save_png(heat.to_uint8(), out)
    _write_json(out.with_suffix(".json"), {"config": _resolved(args), "points": len(points),
                                           "width": width, "height": height})
    print(f"heatmap from {len(points)} point(s) in {len(logs)} log(s) -> {out}")
    return 0


AOI_COLUMNS = ["image", "aoi", "n_ctrl", "n_expr"] + [
    f"{m}_{s}" for m in METRIC_DIRECTIONS for s in ("ctrl", "expr", "winner")
]


def cmd_aoi(args) -> int:
    logs = _filter_logs(load_gaze_logs(args.logs), args)
    aoi = load_aoi_png(args.aoi)
    ctrl = [lg for lg in logs if lg.group == "CTRL"]
    expr = [lg for lg in logs if lg.group == "EXPR"]
    if not ctrl or not expr:
        raise CliError(f"need logs from both groups (CTRL={len(ctrl)}, EXPR={len(expr)})")
    report = attention_shift_report(ctrl, expr, aoi, args.sara_ctrl_rank, args.sara_expr_rank,
                                    args.viewing_ms, args.dispersion, args.min_duration)
    images = sorted({lg.image for lg in logs})
    row = {"image": args.image_id or ";".join(images), "aoi": aoi.id,
           "n_ctrl": len(ctrl), "n_expr": len(expr)}
    for m in METRIC_DIRECTIONS:
        row[f"{m}_ctrl"] = report.ctrl[m]
        row[f"{m}_expr"] = report.expr[m]
        row[f"{m}_winner"] = report.winners[m]
    out = Path(args.out)
    _write_csv(out / "aoi_report.csv", AOI_COLUMNS, [row])
    _write_json(out / "aoi_report.json", {"config": _resolved(args), "report": row,
                                          "metrics": report.rows()})
    wins = [m for m, w in report.winners.items() if w == "EXPR"]
    print(f"AOI {aoi.id}: EXPR better on {len(wins)}/{len(report.winners)} metrics")
    return 0


def _parse_bins(text):
    bins = []
    for part in text.split(","):
        lo, hi = part.split("-")
        bins.append((int(lo), int(hi)))
    return tuple(bins)


def cmd_stats(args) -> int:
    logs = _filter_logs(load_gaze_logs(args.logs), args)
    if not logs:
        raise CliError("no gaze logs found")
    out = Path(args.out)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.by == "age":
            rows = age_table(logs, _parse_bins(args.bins), args.include_hovers, args.alpha)
            cols = AGE_COLUMNS
        else:
            rows = gender_table(logs, args.include_hovers, args.alpha)
            cols = GENDER_COLUMNS
    for w in caught:
        log.warning("%s", w.message)
    _write_csv(out, cols, rows)
    _write_json(out.with_suffix(".meta.json"), {
        "config": _resolved(args), "rows": len(rows),
        "warnings": sorted({str(w.message) for w in caught}),
    })
    sig = sum(1 for r in rows if r.get("significant_x") or r.get("significant_y"))
    if args.by == "age":
        print(f"{len(rows)} image/group cell(s); {sig} with a significant age effect")
    else:
        print(f"{len(rows)} image/group cell(s) written")
    return 0


def _add_gaze_flags(p):
    p.add_argument("logs", nargs="+", help="gaze-log JSON files or directories")
    p.add_argument("--image-id", default=None, help="only logs for this image")
    p.add_argument("--dispersion", type=float, default=25.0, help="I-DT dispersion (px)")
    p.add_argument("--min-duration", type=float, default=100.0, help="I-DT minimum (ms)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sarakit", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rank", help="rank grid segments or element masks of one image")
    p.add_argument("image", help="input screenshot (RGB PNG)")
    p.add_argument("--saliency", default=None, help="precomputed grayscale saliency map")
    p.add_argument("--builtin", action="store_true", help="use the spectral-residual backbone")
    p.add_argument("--masks", default=None, help="directory of binary mask PNGs or a label PNG")
    p.add_argument("--depth", default=None, help="grayscale depth map, 255 = nearest")
    p.add_argument("--out", required=True)
    p.add_argument("--no-overlay", action="store_true")
    _add_sara_flags(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("evaluate", help="mean SOR over a dataset manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--backbone", choices=("file", "builtin"), default="file")
    p.add_argument("--seed", type=int, default=0, help="seed for sAUC negative sampling")
    _add_sara_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("heatmap", help="attention heatmap PNG from gaze/mouse logs")
    _add_gaze_flags(p)
    p.add_argument("--out", required=True, help="output PNG")
    p.add_argument("--group", choices=("CTRL", "EXPR", "ctrl", "expr"), default=None)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--image", default=None, help="take the size from this image")
    p.add_argument("--sigma-px", type=float, default=25.0)
    p.add_argument("--weight", choices=("duration", "count"), default="duration")
    p.add_argument("--source", choices=("fixations", "samples"), default="fixations")
    p.add_argument("--kinds", nargs="+", default=["gaze", "mouse", "click"])
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("aoi", help="AOI attention-shift report (CTRL vs EXPR)")
    _add_gaze_flags(p)
    p.add_argument("--aoi", required=True, help="binary AOI mask PNG")
    p.add_argument("--out", required=True)
    p.add_argument("--sara-ctrl-rank", type=float, default=None)
    p.add_argument("--sara-expr-rank", type=float, default=None)
    p.add_argument("--viewing-ms", type=float, default=10_000.0)
    p.set_defaults(func=cmd_aoi)

    p = sub.add_parser("stats", help="demographic tests on click locations")
    p.add_argument("logs", nargs="+")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--image-id", default=None)
    p.add_argument("--group", choices=("CTRL", "EXPR", "ctrl", "expr"), default=None)
    p.add_argument("--by", choices=("age", "gender"), default="age")
    p.add_argument("--bins", default=",".join(f"{lo}-{hi}" for lo, hi in DEFAULT_AGE_BINS))
    p.add_argument("--include-hovers", action="store_true")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_stats)

    for sp in sub.choices.values():
        sp.add_argument("--config", default=None, help="JSON file of flag defaults")
    return parser


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        with open(args.config, encoding="utf-8") as fh:
            conf = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {args.config}: {exc}") from exc
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    defaults = {}
    for key, value in conf.items():
        dest = {"sigma": "sigma_blur"}.get(key, key.replace("-", "_"))
        if dest not in known:
            raise CliError(f"unknown config key {key!r} for '{args.command}'")
        defaults[dest] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s: %(message)s")
        return args.func(args)
    except (CliError, GazeLogError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
