"""Monte-Carlo SNR sweep comparing four feature-extraction methods.

For every iteration ``m`` the noise stream is
``np.random.default_rng(SeedSequence(master_seed, spawn_key=(m,)))``, so each
iteration is reproducible on its own and results do not depend on how
iterations are spread over worker processes. The clean signal is synthesized
once per run with ``seed=master_seed``.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from . import __version__
from .errors import InvalidConfig, NoValidSegments, SegmentTooShort, TargetOutOfRange
from .features import FEATURE_IDS, SlopeWindowConfig, as_dict, feature_matrix, relative_difference
from .filters import design_butterworth, filter_array
from .noise import NoiseConfig, NoiseVersion, compute_snr, corrupt_sweep, format_snr, parse_snr
from .segmenter import (SegmentationConfig, combine_rows, oracle_segments, segment_feature_rows,
                        select_segments, slide_windows)
from .signal import Signal, SynthesisConfig, synthesize_bvp

log = logging.getLogger(__name__)

METHODS = ("raw", "baseline", "segmentation", "oracle")
METHOD_LABELS = {
    "raw": "raw noisy signal",
    "baseline": "4th-order Butterworth (1-8 Hz)",
    "segmentation": "segmentation method",
    "oracle": "best case (known noise)",
}
RECORD_COLUMNS = ("iteration", "s", "snr", "method", "feature", "value", "rel_diff", "fallback",
                  "missing")


@dataclass(frozen=True)
class BaselineFilter:
    order: int = 4
    low_hz: float = 1.0
    high_hz: float = 8.0


@dataclass(frozen=True)
class RunConfig:
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    features: SlopeWindowConfig = field(default_factory=SlopeWindowConfig)
    baseline: BaselineFilter = field(default_factory=BaselineFilter)
    iterations: int = 50
    increment_stride: int = 10
    master_seed: int = 0
    methods: tuple = METHODS

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))

    def validate(self) -> None:
        if self.iterations < 2:
            raise InvalidConfig("iterations must be at least 2 (paired t-tests need two pairs)")
        if self.increment_stride < 1:
            raise InvalidConfig("increment_stride must be at least 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise InvalidConfig(f"methods must be a non-empty subset of {METHODS}")
        self.synthesis.validate()
        self.segmentation.validate()

    def increments(self, fs: float) -> list[int]:
        total = self.noise.increments(fs)
        out = list(range(0, total + 1, self.increment_stride))
        if out[-1] != total:
            out.append(total)
        return out

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["noise"]["version"] = self.noise.version.value
        d["methods"] = list(self.methods)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        sections = {"synthesis": SynthesisConfig, "noise": NoiseConfig,
                    "segmentation": SegmentationConfig, "features": SlopeWindowConfig,
                    "baseline": BaselineFilter}
        kwargs = {}
        names = {f.name for f in dataclasses.fields(cls)}
        for key, value in d.items():
            if key not in names:
                raise InvalidConfig(f"unknown config field {key!r}")
            if key in sections:
                sub = sections[key]
                allowed = {f.name for f in dataclasses.fields(sub)}
                bad = set(value) - allowed
                if bad:
                    raise InvalidConfig(f"unknown {key} field(s): {sorted(bad)}")
                try:
                    kwargs[key] = sub(**value)
                except (TypeError, ValueError) as exc:
                    raise InvalidConfig(f"bad {key} section: {exc}") from exc
            else:
                kwargs[key] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)


def iteration_rng(master_seed: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(iteration,)))


def clean_signal(cfg: RunConfig) -> Signal:
    return synthesize_bvp(cfg.synthesis, seed=cfg.master_seed)


def _method_rows(method: str, noisy: Signal, variant, cfg: RunConfig) -> np.ndarray:
    """Feature row for one method; raises NoValidSegments when nothing survives."""
    fs = noisy.sample_rate_hz
    if method == "raw":
        return feature_matrix(noisy.samples, fs, cfg.features)[0]
    if method == "baseline":
        b = cfg.baseline
        design = _baseline_design(b.order, b.low_hz, b.high_hz, fs)
        return feature_matrix(filter_array(design, noisy.samples), fs, cfg.features)[0]
    seg = cfg.segmentation
    if method == "segmentation":
        segs = select_segments(noisy, slide_windows(noisy, seg), seg)
    else:
        segs = oracle_segments(variant, seg.min_len(fs))
    rows = segment_feature_rows(noisy, segs, seg, cfg.features)
    return combine_rows(rows, segs.lengths, segs.starts)


_DESIGNS: dict = {}


def _baseline_design(order, lo, hi, fs):
    key = (order, lo, hi, fs)
    if key not in _DESIGNS:
        _DESIGNS[key] = design_butterworth(order, "bandpass", lo, hi, fs)
    return _DESIGNS[key]


def run_iteration(cfg: RunConfig, iteration: int, clean: Signal | None = None,
                  clean_row: np.ndarray | None = None) -> list[tuple]:
    """All records of one Monte-Carlo iteration, in (s, method, feature) order."""
    clean = clean if clean is not None else clean_signal(cfg)
    fs = clean.sample_rate_hz
    if clean_row is None:
        clean_row = feature_matrix(clean.samples, fs, cfg.features)[0]
    clean_feats = as_dict(clean_row)
    methods = [m for m in METHODS if m in cfg.methods]
    out = []
    rng = iteration_rng(cfg.master_seed, iteration)
    for variant in corrupt_sweep(clean, cfg.noise, cfg.increments(fs), rng):
        s = variant.increment_index
        snr = compute_snr(clean, variant)
        for method in methods:
            try:
                row = _method_rows(method, variant.signal, variant, cfg)
            except (NoValidSegments, SegmentTooShort):
                out.extend((iteration, s, snr, method, f, np.nan, np.nan, False, True)
                           for f in FEATURE_IDS)
                continue
            diffs, flags = relative_difference(as_dict(row), clean_feats)
            out.extend((iteration, s, snr, method, f, float(v), diffs[f], flags[f], False)
                       for f, v in zip(FEATURE_IDS, row))
    return out


def _worker(args):
    cfg, iterations = args
    clean = clean_signal(cfg)
    clean_row = feature_matrix(clean.samples, clean.sample_rate_hz, cfg.features)[0]
    return [run_iteration(cfg, m, clean, clean_row) for m in iterations]


def _sort_records(df: pd.DataFrame) -> pd.DataFrame:
    df = df.copy()
    df["method"] = pd.Categorical(df["method"], categories=METHODS, ordered=True)
    df["feature"] = pd.Categorical(df["feature"], categories=FEATURE_IDS, ordered=True)
    df = df.sort_values(["iteration", "s", "method", "feature"], kind="stable")
    df["method"] = df["method"].astype(str)
    df["feature"] = df["feature"].astype(str)
    return df.reset_index(drop=True)


def run_experiment(cfg: RunConfig, workers: int = 1, progress=None) -> pd.DataFrame:
    """Run the sweep and return the records as a DataFrame with ``RECORD_COLUMNS``.

    Missing observations (no segment survived) appear as rows with
    ``missing=True`` and NaN value/rel_diff, one per feature.
    """
    cfg.validate()
    iterations = list(range(cfg.iterations))
    rows: list = []
    if workers <= 1:
        clean = clean_signal(cfg)
        clean_row = feature_matrix(clean.samples, clean.sample_rate_hz, cfg.features)[0]
        for m in iterations:
            rows.extend(run_iteration(cfg, m, clean, clean_row))
            if progress:
                progress(m + 1, cfg.iterations)
    else:
        chunks = [iterations[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for done, result in enumerate(pool.map(_worker, [(cfg, c) for c in chunks if c])):
                for part in result:
                    rows.extend(part)
                if progress:
                    progress(done + 1, len(chunks))
    df = pd.DataFrame(rows, columns=list(RECORD_COLUMNS))
    return _sort_records(df)


def segment_size_sweep(cfg: RunConfig, window_sizes_s: Sequence[float], workers: int = 1) -> pd.DataFrame:
    """Segmentation-method records for each window size, tagged by ``window_s``."""
    frames = []
    for w in window_sizes_s:
        sub = dataclasses.replace(
            cfg, methods=("segmentation",),
            segmentation=dataclasses.replace(cfg.segmentation, window_s=float(w)))
        df = run_experiment(sub, workers=workers)
        df.insert(0, "window_s", float(w))
        frames.append(df)
    return pd.concat(frames, ignore_index=True)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, float) and np.isnan(v):
        return ""
    return repr(float(v))


def write_records(df: pd.DataFrame, path) -> None:
    """Write records CSV; ``snr`` is ``clean`` for the uncorrupted increment."""
    path = Path(path)
    cols = list(df.columns)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for rec in df.itertuples(index=False):
            out = []
            for col, v in zip(cols, rec):
                if col == "snr":
                    out.append(format_snr(v))
                elif col in ("iteration", "s"):
                    out.append(str(int(v)))
                elif col in ("method", "feature"):
                    out.append(v)
                else:
                    out.append(_fmt(v))
            w.writerow(out)


def read_records(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"snr": str, "method": str, "feature": str},
                     keep_default_na=False, na_values={"value": [""], "rel_diff": [""]})
    df["snr"] = df["snr"].map(parse_snr)
    for col in ("fallback", "missing"):
        df[col] = df[col].astype(str).str.lower() == "true"
    return df


def write_sidecar(cfg: RunConfig, path, extra: dict | None = None) -> None:
    payload = {"software": "bvpseg", "version": __version__, "config": cfg.to_dict()}
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def aggregate(records: pd.DataFrame, bucketing: str | Sequence[float] = "increment",
              absolute: bool = False) -> pd.DataFrame:
    """Mean, standard error and count of rel_diff per (method, feature, bucket).

    ``bucketing="increment"`` groups by ``s`` with the bucket centre at the
    mean SNR over iterations; a sequence of edges groups by SNR interval
    instead. The SEM uses the sample standard deviation (ddof=1) and is NaN
    when ``n < 2``. Buckets whose records are all missing get ``n = 0`` and
    ``empty = True``.
    """
    df = records.copy()
    df["y"] = df["rel_diff"].abs() if absolute else df["rel_diff"]
    if isinstance(bucketing, str):
        if bucketing != "increment":
            raise ValueError(f"unknown bucketing {bucketing!r}")
        df["bucket"] = df["s"]
        centres = df.groupby("s")["snr"].mean()
    else:
        edges = np.asarray(bucketing, dtype=float)
        df["bucket"] = np.digitize(df["snr"], edges)
        centres = None
    valid = df[~df["missing"]]
    keys = ["method", "feature", "bucket"]
    g = valid.groupby(keys, sort=False)["y"]
    stats = g.agg(mean="mean", std=lambda v: v.std(ddof=1), n="count").reset_index()
    everything = df[keys].drop_duplicates()
    out = everything.merge(stats, on=keys, how="left")
    out["n"] = out["n"].fillna(0).astype(int)
    out["sem"] = out["std"] / np.sqrt(out["n"].where(out["n"] > 0))
    out.loc[out["n"] < 2, "sem"] = np.nan
    out["empty"] = out["n"] == 0
    if centres is not None:
        out["snr_center"] = out["bucket"].map(centres)
    else:
        snr_means = valid.groupby("bucket")["snr"].mean()
        out["snr_center"] = out["bucket"].map(snr_means)
    out = out.drop(columns="std")
    return out[["method", "feature", "bucket", "snr_center", "mean", "sem", "n", "empty"]]


def increment_snr(records: pd.DataFrame) -> pd.Series:
    """Mean SNR per increment across iterations."""
    per_iter = records.drop_duplicates(["iteration", "s"])
    return per_iter.groupby("s")["snr"].mean().sort_index()


def nearest_snr_slice(records: pd.DataFrame, targets: Iterable[float],
                      rel_tolerance: float = 0.1) -> dict:
    """Pick, per target SNR, the increment whose mean SNR is closest.

    Targets must lie within the achieved finite SNR range, widened by
    ``rel_tolerance`` (relative) at both ends. Ties go to the smaller
    increment. Returns ``{target: (s, mean_snr, records_at_s)}``.
    """
    snr = increment_snr(records)
    snr = snr[np.isfinite(snr)]
    if snr.empty:
        raise TargetOutOfRange("no corrupted increments in the records")
    lo, hi = snr.min() * (1 - rel_tolerance), snr.max() * (1 + rel_tolerance)
    out = {}
    for target in targets:
        if not lo <= target <= hi:
            raise TargetOutOfRange(
                f"target SNR {target} outside achieved range [{snr.min():.4g}, {snr.max():.4g}]")
        dist = (snr - target).abs()
        best = dist.min()
        s = int(min(i for i, d in dist.items() if d == best))
        out[target] = (s, float(snr[s]), records[records["s"] == s])
    return out
