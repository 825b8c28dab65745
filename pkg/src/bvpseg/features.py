"""Time- and frequency-domain BVP features.

Twelve time-domain statistics plus seven statistics over the real parts and
seven over the imaginary parts of the one-sided DFT, 26 in total. Feature
extraction uses the unscaled DFT by default (``dft_scaling="none"``);
:func:`spectrum` defaults to 1/N scaling. Column order for serialization is
``FEATURE_IDS``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import KeyMismatch, SignalTooShort
from .signal import Signal, Spectrum

TIME_FEATURES = ("avg", "std", "med", "min", "max", "integral", "min_slope", "max_slope",
                 "avg_slope", "slope", "avg_grad", "avg_neg_grad")
FREQ_STATS = ("avg", "std", "med", "min", "max", "sum", "iqr")

FEATURE_IDS = (tuple(f"time.{name}" for name in TIME_FEATURES)
               + tuple(f"freq_re.{name}" for name in FREQ_STATS)
               + tuple(f"freq_im.{name}" for name in FREQ_STATS))

# rows reported in the published t-test table
TABLE_FEATURES = tuple(
    f for f in FEATURE_IDS
    if f not in ("time.avg_grad", "time.avg_neg_grad", "freq_im.std", "freq_im.max"))

FEATURE_LABELS = {
    "time.avg": "Time Avg.", "time.std": "Time Std.", "time.med": "Time Med.",
    "time.min": "Time Min.", "time.max": "Time Max.", "time.integral": "Int.",
    "time.min_slope": "Min. S.", "time.max_slope": "Max. S.", "time.avg_slope": "Avg. S.",
    "time.slope": "Slope", "time.avg_grad": "Avg. G.", "time.avg_neg_grad": "Avg. N. G.",
    **{f"freq_re.{s}": f"Re. Freq. {s.capitalize() if s != 'iqr' else 'IQR'}" for s in FREQ_STATS},
    **{f"freq_im.{s}": f"Im. Freq. {s.capitalize() if s != 'iqr' else 'IQR'}" for s in FREQ_STATS},
}


DFT_SCALINGS = ("none", "1/N")


@dataclass(frozen=True)
class SlopeWindowConfig:
    """Sliding-window slope settings plus the DFT scaling used for frequency features.

    ``dft_scaling="none"`` uses the plain DFT sum; ``"1/N"`` divides every bin
    by the segment length.
    """

    window_s: float = 1.0
    shift: int = 1
    dft_scaling: str = "none"

    def __post_init__(self):
        if self.dft_scaling not in DFT_SCALINGS:
            raise ValueError(f"dft_scaling must be one of {DFT_SCALINGS}")
        if self.shift < 1:
            raise ValueError("slope window shift must be a positive number of samples")

    def window_len(self, fs: float) -> int:
        return int(round(self.window_s * fs))


FeatureConfig = SlopeWindowConfig


def _ls_slope_weights(n: int, fs: float) -> np.ndarray:
    """Weights w such that w @ x is the least-squares slope of x against t = j/fs."""
    j = np.arange(n, dtype=float)
    c = j - j.mean()
    return c * fs / np.sum(c * c)


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def _check_length(n: int, fs: float, cfg: SlopeWindowConfig) -> int:
    w = cfg.window_len(fs)
    if w < 2:
        raise SignalTooShort(f"slope window of {w} samples; need at least 2")
    if n < max(2, w):
        raise SignalTooShort(f"{n} samples; need at least {max(2, w)}")
    return w


def _time_matrix(x: np.ndarray, fs: float, cfg: SlopeWindowConfig) -> np.ndarray:
    """Time features for each row of the 2-D array ``x``; shape (rows, 12)."""
    n = x.shape[1]
    w = _check_length(n, fs, cfg)
    windows = np.lib.stride_tricks.sliding_window_view(x, w, axis=1)[:, ::cfg.shift, :]
    win_slopes = windows @ _ls_slope_weights(w, fs)
    diff = np.diff(x, axis=1) * fs
    neg = np.where(diff < 0, diff, 0.0)
    n_neg = np.count_nonzero(diff < 0, axis=1)
    avg_neg = np.divide(neg.sum(axis=1), n_neg, out=np.zeros(x.shape[0]), where=n_neg > 0)
    return np.column_stack([
        x.mean(axis=1), x.std(axis=1), np.median(x, axis=1), x.min(axis=1), x.max(axis=1),
        _trapezoid(x, dx=1.0 / fs, axis=1),
        win_slopes.min(axis=1), win_slopes.max(axis=1), win_slopes.mean(axis=1),
        x @ _ls_slope_weights(n, fs),
        diff.mean(axis=1), avg_neg,
    ])


def _stats_matrix(v: np.ndarray) -> np.ndarray:
    q25, q75 = np.percentile(v, [25.0, 75.0], axis=1)
    return np.column_stack([v.mean(axis=1), v.std(axis=1), np.median(v, axis=1),
                            v.min(axis=1), v.max(axis=1), v.sum(axis=1), q75 - q25])


def feature_matrix(x: np.ndarray, fs: float, cfg: SlopeWindowConfig | None = None) -> np.ndarray:
    """All 26 features for every row of ``x`` (equal-length segments), ``FEATURE_IDS`` order."""
    cfg = cfg or SlopeWindowConfig()
    x = np.atleast_2d(np.asarray(x, dtype=float))
    bins = np.fft.rfft(x, axis=1)
    if cfg.dft_scaling == "1/N":
        bins = bins / x.shape[1]
    return np.hstack([_time_matrix(x, fs, cfg), _stats_matrix(bins.real), _stats_matrix(bins.imag)])


def time_features(signal: Signal, cfg: SlopeWindowConfig | None = None) -> dict:
    cfg = cfg or SlopeWindowConfig()
    row = _time_matrix(signal.samples[None, :], signal.sample_rate_hz, cfg)[0]
    return {f"time.{name}": float(v) for name, v in zip(TIME_FEATURES, row)}


def spectrum(signal: Signal, scaling: str = "1/N") -> Spectrum:
    """One-sided DFT (bins 0..N//2) of the raw, unwindowed samples."""
    n = len(signal)
    if n < 2:
        raise SignalTooShort("spectrum needs at least 2 samples")
    if scaling not in DFT_SCALINGS:
        raise ValueError(f"scaling must be one of {DFT_SCALINGS}")
    factor = 1.0 / n if scaling == "1/N" else 1.0
    return Spectrum(np.fft.rfft(signal.samples) * factor, signal.sample_rate_hz / n, n, factor)


def frequency_features(spec: Spectrum) -> dict:
    out = {}
    for prefix, part in (("freq_re", spec.real), ("freq_im", spec.imag)):
        row = _stats_matrix(part[None, :])[0]
        out.update({f"{prefix}.{name}": float(v) for name, v in zip(FREQ_STATS, row)})
    return out


def as_dict(row) -> dict:
    return {k: float(v) for k, v in zip(FEATURE_IDS, row)}


def full_features(signal: Signal, cfg: SlopeWindowConfig | None = None) -> dict:
    """All 26 features of ``signal`` keyed by feature id, in ``FEATURE_IDS`` order."""
    cfg = cfg or SlopeWindowConfig()
    _check_length(len(signal), signal.sample_rate_hz, cfg)
    return as_dict(feature_matrix(signal.samples, signal.sample_rate_hz, cfg)[0])


def relative_difference(noisy: dict, clean: dict, eps: float = 1e-12) -> tuple[dict, dict]:
    """Per-feature (noisy - clean) / |clean|.

    Where ``|clean| < eps`` the raw difference is returned instead and the
    feature's fallback flag is set. Returns ``(differences, fallback_flags)``.
    """
    if set(noisy) != set(clean):
        raise KeyMismatch(sorted(set(noisy) ^ set(clean)))
    diffs, flags = {}, {}
    for key in clean:
        ref = clean[key]
        delta = noisy[key] - ref
        if abs(ref) >= eps:
            diffs[key], flags[key] = delta / abs(ref), False
        else:
            diffs[key], flags[key] = delta, True
    return diffs, flags


def features_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FEATURE_IDS)
    for row in rows:
        w.writerow([repr(float(row[k])) for k in FEATURE_IDS])
    return buf.getvalue()
