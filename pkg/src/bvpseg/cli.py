"""Command-line entry point: ``bvpseg <subcommand> ...``.

Exit codes: 0 success, 1 data or runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BVPError
from .experiment import (METHODS, RunConfig, aggregate, read_records, run_experiment,
                         segment_size_sweep, write_records, write_sidecar)
from .features import FEATURE_IDS, TABLE_FEATURES, SlopeWindowConfig, features_csv, full_features
from .noise import NoiseConfig, corrupt
from .segmenter import (SegmentationConfig, segment_report_csv, segmented_features,
                        select_segments, slide_windows)
from .signal import SynthesisConfig, load_signal, save_signal, synthesize_bvp

log = logging.getLogger("bvpseg")

DEFAULT_CONFIG = "default_config.json"


def default_config_text() -> str:
    return resources.files("bvpseg").joinpath("data", DEFAULT_CONFIG).read_text(encoding="utf-8")


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig.from_dict(json.loads(default_config_text()))
    return RunConfig.from_json(path)


def _out(args, name: str | None) -> Path:
    """Resolve an output path: explicit -o wins, else <out-dir>/<default name>."""
    out_dir = Path(args.out_dir or ".")
    if getattr(args, "output", None):
        p = Path(args.output)
        return p if p.is_absolute() or args.out_dir is None else out_dir / p
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / name


def _write_csv_rows(path: Path, header, rows) -> None:
    lines = [",".join(header)] + [",".join(r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_synth(args) -> int:
    cfg = SynthesisConfig(heart_rate_bpm=args.hr, sample_rate_hz=args.fs, duration_s=args.dur,
                          jitter=args.jitter)
    sig = synthesize_bvp(cfg, seed=args.seed if args.seed is not None else 0)
    path = _out(args, "clean.csv")
    save_signal(sig, path)
    print(f"wrote {len(sig)} samples to {path}")
    return 0


def cmd_corrupt(args) -> int:
    clean = load_signal(args.input)
    noise = load_config(args.config).noise if args.config else NoiseConfig()
    noise = dataclasses.replace(noise, version=args.version)
    variant = corrupt(clean, noise, args.s, args.seed if args.seed is not None else 0)
    path = _out(args, "noisy.csv")
    save_signal(variant.signal, path)
    if args.mask:
        mask_path = Path(args.mask) if args.out_dir is None else Path(args.out_dir) / args.mask
        _write_csv_rows(mask_path, ["mask"], [["1" if m else "0"] for m in variant.mask])
    print(f"wrote {args.version} corruption after {args.s} increments to {path}")
    return 0


def cmd_features(args) -> int:
    sig = load_signal(args.input)
    cfg = SlopeWindowConfig(window_s=args.slope_window, dft_scaling=args.dft_scaling)
    feats = full_features(sig, cfg)
    path = _out(args, "features.csv")
    path.write_text(features_csv([feats]), encoding="utf-8")
    print(f"wrote {len(feats)} features to {path}")
    return 0


def cmd_segment(args) -> int:
    sig = load_signal(args.input)
    base = load_config(args.config).segmentation if args.config else SegmentationConfig()
    overrides = {k: v for k, v in {
        "window_s": args.window_s, "shift_s": args.shift_s, "skew_threshold": args.threshold,
        "skew_keep_rule": args.rule, "stride_mode": args.stride_mode}.items() if v is not None}
    cfg = dataclasses.replace(base, **overrides)
    candidates = slide_windows(sig, cfg)
    kept = select_segments(sig, candidates, cfg)
    path = _out(args, "segments.csv")
    path.write_text(segment_report_csv(kept), encoding="utf-8")
    print(f"{len(kept)} of {len(candidates)} windows kept; report in {path}")
    if args.features_out:
        fpath = Path(args.features_out) if args.out_dir is None else Path(args.out_dir) / args.features_out
        feats = segmented_features(sig, kept, cfg, SlopeWindowConfig(dft_scaling=args.dft_scaling))
        fpath.write_text(features_csv([feats]), encoding="utf-8")
    return 0


def _config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(path: Path, config_path, cfg: RunConfig, out_dir: Path) -> None:
    manifest = {
        "config_path": str(config_path) if config_path else f"<bundled {DEFAULT_CONFIG}>",
        "config": cfg.to_dict(),
        "config_sha256": _config_hash(cfg),
        "output_dir": str(out_dir),
        "tool_version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if getattr(args, "iterations", None) is not None:
        changes["iterations"] = args.iterations
    if getattr(args, "stride", None) is not None:
        changes["increment_stride"] = args.stride
    cfg = dataclasses.replace(cfg, **changes)
    cfg.validate()
    return cfg


def cmd_run(args) -> int:
    config_path = args.config_file or args.config
    cfg = _apply_overrides(load_config(config_path), args)
    out_dir = Path(args.out_dir or "results")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(out_dir / "manifest.json", config_path, cfg, out_dir)

    started = time.time()

    def progress(done, total):
        print(f"  {done}/{total} done ({time.time() - started:.0f} s)", file=sys.stderr)

    records = run_experiment(cfg, workers=args.workers, progress=progress)
    write_records(records, out_dir / "records.csv")
    missing = int(records["missing"].sum())
    write_sidecar(cfg, out_dir / "records.json",
                  {"records": int(len(records)), "missing_records": missing})
    curves = aggregate(records)
    curves.to_csv(out_dir / "curves.csv", index=False, lineterminator="\n", float_format="%.10g")
    if args.plots:
        from .plotting import write_all
        write_all(aggregate(records), FEATURE_IDS, out_dir / "figures", log_x=not args.linear)
    print(f"{len(records)} records ({missing} missing) in {time.time() - started:.1f} s "
          f"-> {out_dir / 'records.csv'}")
    return 0


def _feature_selection(text: str | None, default) -> list[str]:
    if text is None:
        return list(default)
    if text == "all":
        return list(FEATURE_IDS)
    if text == "table":
        return list(TABLE_FEATURES)
    chosen = [f.strip() for f in text.split(",") if f.strip()]
    unknown = [f for f in chosen if f not in FEATURE_IDS]
    if unknown:
        raise BVPError(f"unknown feature(s): {unknown}")
    return chosen


def cmd_plot(args) -> int:
    from .plotting import feature_filename, plot_feature

    records = read_records(args.records)
    if records["iteration"].nunique() < 2:
        raise BVPError("plotting needs records from at least 2 iterations")
    features = _feature_selection(args.features, FEATURE_IDS)
    out_dir = Path(args.out_dir or "figures")
    out_dir.mkdir(parents=True, exist_ok=True)
    curves = aggregate(records)
    curves.to_csv(out_dir / "curves.csv", index=False, lineterminator="\n", float_format="%.10g")
    for f in features:
        plot_feature(curves, f, out_dir / feature_filename(f), log_x=not args.linear)
    print(f"wrote {len(features)} SVG figure(s) and curves.csv to {out_dir}")
    return 0


def cmd_stats(args) -> int:
    from .stats import build_table, table_csv, table_markdown

    records = read_records(args.records)
    present = set(records["method"])
    if not {"baseline", "segmentation"} <= present:
        raise BVPError("records need both baseline and segmentation methods")
    targets = [float(t) for t in args.targets.split(",")]
    features = _feature_selection(args.features, TABLE_FEATURES)
    table, report = build_table(records, targets, features, alpha=args.alpha,
                                absolute=not args.signed)
    out_dir = Path(args.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "ttest_table.csv").write_text(table_csv(table, report), encoding="utf-8")
    md = table_markdown(table, report)
    (out_dir / "ttest_table.md").write_text(md, encoding="utf-8")
    print(md)
    return 0


def cmd_sweep_window(args) -> int:
    from .plotting import feature_filename, plot_window_sweep

    config_path = args.config_file or args.config
    cfg = _apply_overrides(load_config(config_path), args)
    sizes = [float(s) for s in args.sizes.split(",")]
    out_dir = Path(args.out_dir or "window_sweep")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(out_dir / "manifest.json", config_path, cfg, out_dir)
    records = segment_size_sweep(cfg, sizes, workers=args.workers)
    write_records(records, out_dir / "sweep_records.csv")
    write_sidecar(cfg, out_dir / "sweep_records.json", {"window_sizes_s": sizes})
    curves = {}
    for size, grp in records.groupby("window_s", sort=True):
        curves[size] = aggregate(grp.drop(columns="window_s"))
        curves[size].to_csv(out_dir / f"curves_w{size:g}.csv", index=False, lineterminator="\n",
                            float_format="%.10g")
    for f in _feature_selection(args.features, FEATURE_IDS):
        plot_window_sweep(curves, f, out_dir / feature_filename(f), log_x=not args.linear)
    print(f"window sweep over {sizes} s written to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON run configuration")

    p = argparse.ArgumentParser(prog="bvpseg", description="Synthetic BVP noise sweeps and feature-error reports.",
                                epilog="Exit codes: 0 success, 1 data or runtime error, 2 usage error.")
    p.add_argument("--version", action="version", version=f"bvpseg {__version__}")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="synthesize a clean BVP signal")
    s.add_argument("--hr", type=float, default=70.0)
    s.add_argument("--fs", type=float, default=64.0)
    s.add_argument("--dur", type=float, default=300.0)
    s.add_argument("--jitter", type=float, default=0.0)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("corrupt", parents=[common], help="apply s noise increments")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--version", dest="version", choices=["V1", "V2", "V3"], default="V3")
    s.add_argument("--s", type=int, required=True)
    s.add_argument("-o", "--output")
    s.add_argument("--mask")
    s.set_defaults(func=cmd_corrupt)

    s = sub.add_parser("features", parents=[common], help="extract the 26 features")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--slope-window", type=float, default=1.0)
    s.add_argument("--dft-scaling", choices=["none", "1/N"], default="none")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("segment", parents=[common], help="skewness-gated segmentation report")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--window-s", type=float)
    s.add_argument("--shift-s", type=float)
    s.add_argument("--threshold", type=float)
    s.add_argument("--rule", choices=["greater_than", "less_than"])
    s.add_argument("--stride-mode", choices=["pseudocode", "literal"])
    s.add_argument("--dft-scaling", choices=["none", "1/N"], default="none")
    s.add_argument("--features-out")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_segment)

    for name, func, help_ in (("run", cmd_run, "run the Monte-Carlo SNR sweep"),
                              ("sweep-window", cmd_sweep_window, "segment-size sweep")):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("config_file", nargs="?", help="JSON run configuration (default: bundled)")
        s.add_argument("--workers", type=int, default=1)
        s.add_argument("--iterations", type=int)
        s.add_argument("--stride", type=int, help="evaluate every n-th increment")
        s.add_argument("--linear", action="store_true", help="linear SNR axis in figures")
        s.set_defaults(func=func)
        if name == "run":
            s.add_argument("--plots", action="store_true", help="also render SVG figures")
        else:
            s.add_argument("--sizes", default="2,3,5,8,10")
            s.add_argument("--features", help="comma list, 'all' or 'table'")

    s = sub.add_parser("plot", parents=[common], help="SVG curves from a records CSV")
    s.add_argument("records")
    s.add_argument("--features", help="comma list, 'all' or 'table' (default all)")
    s.add_argument("--linear", action="store_true")
    s.set_defaults(func=cmd_plot)

    s = sub.add_parser("stats", parents=[common], help="paired t-test table from a records CSV")
    s.add_argument("records")
    s.add_argument("--targets", default="0.10,0.25,0.50,0.75")
    s.add_argument("--features", help="comma list, 'all' or 'table' (default table)")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--signed", action="store_true", help="test signed rather than absolute differences")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("default-config", parents=[common], help="print the bundled run configuration")
    s.set_defaults(func=lambda args: (print(default_config_text(), end=""), 0)[1])
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (BVPError, OSError, ValueError) as exc:
        print(f"bvpseg {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
