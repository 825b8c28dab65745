"""Skewness-gated segmentation and the mask-based best-case variant.

Windows of ``window_s`` seconds are cut from the signal, windows whose
skewness fails the keep rule are discarded, each surviving window is
band-passed, and the per-window features are averaged with weights equal to
the window length.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import (InvalidConfig, NoValidSegments, SegmentTooShort, SignalTooShort, TooShort,
                     ZeroVariance)
from .features import FEATURE_IDS, SlopeWindowConfig, as_dict, feature_matrix
from .filters import FilterDesign, design_butterworth, filter_array
from .noise import NoisyVariant
from .signal import Signal

KEEP_RULES = ("greater_than", "less_than")
STRIDE_MODES = ("pseudocode", "literal")


@dataclass(frozen=True)
class SegmentationConfig:
    window_s: float = 5.0
    shift_s: float = 1.0
    skew_threshold: float = 0.05
    skew_keep_rule: str = "greater_than"
    min_points_s: float = 2.0
    min_points: int | None = None
    stride_mode: str = "pseudocode"
    filter_order: int = 2
    filter_low_hz: float = 1.0
    filter_high_hz: float = 8.0

    def validate(self) -> None:
        if not self.window_s > 0 or not self.shift_s > 0:
            raise InvalidConfig("window_s and shift_s must be positive")
        if self.shift_s > self.window_s:
            raise InvalidConfig("shift_s must not exceed window_s")
        if self.stride_mode not in STRIDE_MODES:
            raise InvalidConfig(f"stride_mode must be one of {STRIDE_MODES}")
        if self.stride_mode == "pseudocode" and self.shift_s >= self.window_s:
            # i <- i + W_L - W_S would never advance
            raise InvalidConfig("pseudocode stride needs shift_s < window_s")
        if self.skew_keep_rule not in KEEP_RULES:
            raise InvalidConfig(f"skew_keep_rule must be one of {KEEP_RULES}")

    def window_len(self, fs: float) -> int:
        return int(round(self.window_s * fs))

    def stride(self, fs: float) -> int:
        shift = int(round(self.shift_s * fs))
        return self.window_len(fs) - shift if self.stride_mode == "pseudocode" else shift

    def min_len(self, fs: float) -> int:
        n = self.min_points if self.min_points is not None else int(round(self.min_points_s * fs))
        if n < 2:
            raise InvalidConfig("min_points must be at least 2")
        return n

    def design(self, fs: float) -> FilterDesign:
        return _bandpass(self.filter_order, float(self.filter_low_hz), float(self.filter_high_hz),
                         float(fs))


@lru_cache(maxsize=32)
def _bandpass(order: int, lo: float, hi: float, fs: float) -> FilterDesign:
    return design_butterworth(order, "bandpass", lo, hi, fs)


@dataclass(frozen=True, eq=False)
class SegmentSet:
    """Half-open sample ranges ``[start, start + length)`` into a parent signal."""

    starts: np.ndarray
    lengths: np.ndarray
    report: list = field(default_factory=list, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "starts", np.asarray(self.starts, dtype=int))
        object.__setattr__(self, "lengths", np.asarray(self.lengths, dtype=int))

    def __len__(self) -> int:
        return self.starts.size

    def ranges(self):
        return list(zip(self.starts.tolist(), self.lengths.tolist()))

    @property
    def weights(self) -> np.ndarray:
        return self.lengths.astype(float)


def skewness(x) -> float:
    """Moment skewness m3 / m2**1.5 with 1/n central moments."""
    x = np.asarray(x, dtype=float)
    if x.size < 3:
        raise TooShort("skewness needs at least 3 samples")
    if np.ptp(x) == 0:
        raise ZeroVariance("constant sequence has no skewness")
    d = x - x.mean()
    m2 = np.mean(d * d)
    m3 = np.mean(d * d * d)
    return float(m3 / m2**1.5)


def _skewness_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise skewness; NaN for constant rows."""
    d = x - x.mean(axis=1, keepdims=True)
    m2 = np.mean(d * d, axis=1)
    m3 = np.mean(d * d * d, axis=1)
    flat = np.ptp(x, axis=1) == 0
    out = np.full(x.shape[0], np.nan)
    out[~flat] = m3[~flat] / m2[~flat] ** 1.5
    return out


def slide_windows(signal: Signal, cfg: SegmentationConfig | None = None) -> SegmentSet:
    """Candidate windows; a trailing partial window is kept if it has at least min_points."""
    cfg = cfg or SegmentationConfig()
    cfg.validate()
    fs = signal.sample_rate_hz
    n = len(signal)
    wl = cfg.window_len(fs)
    stride = cfg.stride(fs)
    min_len = cfg.min_len(fs)
    if n < wl:
        raise SignalTooShort(f"signal of {n} samples is shorter than one {wl}-sample window")
    starts, lengths = [], []
    i = 0
    while i < n:
        length = min(wl, n - i)
        if length == wl or length >= min_len:
            starts.append(i)
            lengths.append(length)
        if i + wl >= n:
            break
        i += stride
    return SegmentSet(starts, lengths)


def _by_length(x: np.ndarray, segments: SegmentSet):
    """Group segments of equal length so they can be processed as one 2-D batch."""
    for length in np.unique(segments.lengths):
        idx = np.flatnonzero(segments.lengths == length)
        rows = np.stack([x[s:s + length] for s in segments.starts[idx]])
        yield idx, rows


def select_segments(signal: Signal, candidates: SegmentSet,
                    cfg: SegmentationConfig | None = None) -> SegmentSet:
    """Keep candidates whose skewness passes the keep rule and that have enough points.

    The returned set carries a per-candidate report (start_s, length_s,
    skewness, kept, reason).
    """
    cfg = cfg or SegmentationConfig()
    fs = signal.sample_rate_hz
    min_len = cfg.min_len(fs)
    skews = np.full(len(candidates), np.nan)
    for idx, rows in _by_length(signal.samples, candidates):
        skews[idx] = _skewness_rows(rows) if rows.shape[1] >= 3 else np.nan

    report, keep = [], []
    for k, (start, length) in enumerate(candidates.ranges()):
        g = skews[k]
        if np.isnan(g):
            ok, reason = False, "zero_variance"
        elif cfg.skew_keep_rule == "greater_than" and not g > cfg.skew_threshold:
            ok, reason = False, "skewness"
        elif cfg.skew_keep_rule == "less_than" and not g < cfg.skew_threshold:
            ok, reason = False, "skewness"
        elif length < min_len:
            ok, reason = False, "too_short"
        else:
            ok, reason = True, "kept"
        keep.append(ok)
        report.append({"start_s": start / fs, "length_s": length / fs, "skewness": float(g),
                       "kept": ok, "reason": reason})
    keep = np.array(keep, dtype=bool)
    if not keep.any():
        raise NoValidSegments("every candidate window was rejected")
    return SegmentSet(candidates.starts[keep], candidates.lengths[keep], report)


def oracle_segments(variant: NoisyVariant, min_points: int) -> SegmentSet:
    """Maximal runs of noise-free samples (mask false) with at least ``min_points`` samples."""
    clean = ~np.asarray(variant.mask, dtype=bool)
    padded = np.concatenate(([False], clean, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    starts, ends = edges[0::2], edges[1::2]
    lengths = ends - starts
    ok = lengths >= min_points
    if not ok.any():
        raise NoValidSegments("no noise-free run is long enough")
    return SegmentSet(starts[ok], lengths[ok])


def segment_feature_rows(signal: Signal, segments: SegmentSet, cfg: SegmentationConfig | None = None,
                         slope_cfg: SlopeWindowConfig | None = None) -> np.ndarray:
    """Filtered per-segment feature rows, ordered by segment start."""
    cfg = cfg or SegmentationConfig()
    if len(segments) == 0:
        raise NoValidSegments("no segments to combine")
    fs = signal.sample_rate_hz
    design = cfg.design(fs)
    rows = np.empty((len(segments), len(FEATURE_IDS)))
    for idx, batch in _by_length(signal.samples, segments):
        if batch.shape[1] < 3 * design.n_sections:
            raise SegmentTooShort(f"{batch.shape[1]}-sample segment is too short to filter")
        rows[idx] = feature_matrix(filter_array(design, batch, axis=1), fs, slope_cfg)
    return rows


def combine_rows(rows: np.ndarray, lengths: np.ndarray, starts: np.ndarray | None = None) -> np.ndarray:
    """Length-weighted mean of feature rows, summed in start order."""
    order = np.argsort(starts, kind="stable") if starts is not None else np.arange(len(lengths))
    w = np.asarray(lengths, dtype=float)[order]
    w = w / w.sum()
    return w @ rows[order]


def segmented_features(signal: Signal, segments: SegmentSet, cfg: SegmentationConfig | None = None,
                       slope_cfg: SlopeWindowConfig | None = None) -> dict:
    rows = segment_feature_rows(signal, segments, cfg, slope_cfg)
    return as_dict(combine_rows(rows, segments.lengths, segments.starts))


def segmentation_features(signal: Signal, cfg: SegmentationConfig | None = None,
                          slope_cfg: SlopeWindowConfig | None = None) -> dict:
    """Full skewness-gated pipeline: windows, selection, filtering, weighted features."""
    cfg = cfg or SegmentationConfig()
    kept = select_segments(signal, slide_windows(signal, cfg), cfg)
    return segmented_features(signal, kept, cfg, slope_cfg)


def oracle_features(variant: NoisyVariant, cfg: SegmentationConfig | None = None,
                    slope_cfg: SlopeWindowConfig | None = None) -> dict:
    cfg = cfg or SegmentationConfig()
    segs = oracle_segments(variant, cfg.min_len(variant.signal.sample_rate_hz))
    return segmented_features(variant.signal, segs, cfg, slope_cfg)


def segment_report_csv(segments: SegmentSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["start_s", "length_s", "skewness", "kept", "reason"])
    for row in segments.report:
        w.writerow([repr(row["start_s"]), repr(row["length_s"]), repr(row["skewness"]),
                    str(row["kept"]).lower(), row["reason"]])
    return buf.getvalue()
