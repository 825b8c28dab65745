"""Paired right-tailed t-tests, Bonferroni correction and the per-feature p-value table."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import InvalidAlpha, TooFewPairs
from .features import FEATURE_LABELS, TABLE_FEATURES

_EPS = 1e-16
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = _TINY if abs(d) < _TINY else d
    d = 1.0 / d
    h = d
    for m in range(1, 10000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    # the continued fraction converges fast only on this side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf(t: float, df: float) -> float:
    """Upper tail P(T > t) of Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0:
        return 0.5
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    x = df / (df + t * t)
    tail = 0.5 * betainc_regularized(df / 2.0, 0.5, x)
    return tail if t > 0 else 1.0 - tail


def t_cdf(t: float, df: float) -> float:
    if t == 0:
        return 0.5
    if t < 0:
        return t_sf(-t, df)
    return 1.0 - t_sf(t, df)


def paired_t_right(d: Sequence[float]) -> tuple[float, float]:
    """Right-tailed one-sample t-test of mean(d) > 0.

    Returns ``(t, p)``. With zero spread the test is degenerate and p is
    0, 1 or 0.5 by the sign of the mean (t is then +inf, -inf or 0).
    """
    d = np.asarray(d, dtype=float)
    n = d.size
    if n < 2:
        raise TooFewPairs(f"need at least 2 pairs, got {n}")
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean > 0:
            return math.inf, 0.0
        if mean < 0:
            return -math.inf, 1.0
        return 0.0, 0.5
    t = mean / (sd / math.sqrt(n))
    return t, t_sf(t, n - 1)


@dataclass(frozen=True)
class CorrectionReport:
    alpha: float
    m_tests: int
    corrected_alpha: float
    fwer_uncorrected: float

    def describe(self) -> str:
        return (f"alpha={self.alpha:g}, tests={self.m_tests}, "
                f"uncorrected FWER={self.fwer_uncorrected:.4f}, "
                f"Bonferroni alpha={self.corrected_alpha:.4e}")


def bonferroni(alpha: float, m: int) -> CorrectionReport:
    if not 0.0 < alpha < 1.0:
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")
    if m < 1:
        raise ValueError("number of tests must be at least 1")
    return CorrectionReport(alpha, int(m), alpha / m, 1.0 - (1.0 - alpha) ** m)


def paired_differences(records: pd.DataFrame, feature: str, absolute: bool = True,
                       better: str = "segmentation", reference: str = "baseline") -> np.ndarray:
    """Per-observation ``|rel_diff_reference| - |rel_diff_better|``, dropping incomplete pairs.

    Observations are paired on (iteration, s).
    """
    sub = records[(records["feature"] == feature) & ~records["missing"]]
    a = sub[sub["method"] == reference].set_index(["iteration", "s"])["rel_diff"]
    b = sub[sub["method"] == better].set_index(["iteration", "s"])["rel_diff"]
    joined = pd.concat({"ref": a, "alt": b}, axis=1, join="inner").sort_index()
    if absolute:
        return (joined["ref"].abs() - joined["alt"].abs()).to_numpy()
    return (joined["ref"] - joined["alt"]).to_numpy()


def build_table(records: pd.DataFrame, snr_targets: Sequence[float] = (0.10, 0.25, 0.50, 0.75),
                features: Sequence[str] = TABLE_FEATURES, alpha: float = 0.05,
                absolute: bool = True, rel_tolerance: float = 0.1):
    """One right-tailed paired t-test per (feature, SNR target).

    Returns ``(table, report)``; ``table`` has one row per cell with columns
    feature, snr_target, s, snr, n, t_stat, p_value, significant.
    """
    from .experiment import nearest_snr_slice

    report = bonferroni(alpha, len(features) * len(snr_targets))
    slices = nearest_snr_slice(records, snr_targets, rel_tolerance=rel_tolerance)
    rows = []
    for feature in features:
        for target in snr_targets:
            s, snr, sub = slices[target]
            d = paired_differences(sub, feature, absolute=absolute)
            if d.size >= 2:
                t, p = paired_t_right(d)
            else:
                t, p = math.nan, math.nan
            rows.append({"feature": feature, "snr_target": float(target), "s": s, "snr": snr,
                         "n": int(d.size), "t_stat": t, "p_value": p,
                         "significant": bool(p < report.corrected_alpha) if d.size >= 2 else False})
    return pd.DataFrame(rows), report


def table_csv(table: pd.DataFrame, report: CorrectionReport) -> str:
    buf = io.StringIO()
    buf.write(f"# {report.describe()}\n")
    out = table.copy()
    out["significant"] = out["significant"].map(lambda v: "true" if v else "false")
    out.to_csv(buf, index=False, lineterminator="\n", float_format="%.10g")
    return buf.getvalue()


def table_markdown(table: pd.DataFrame, report: CorrectionReport) -> str:
    """Feature x SNR grid of p-values; significant cells are bold."""
    targets = list(dict.fromkeys(table["snr_target"]))
    lines = [f"<!-- {report.describe()} -->", "",
             "| Feature/SNR | " + " | ".join(f"{t:.2f}" for t in targets) + " |",
             "|---|" + "---:|" * len(targets)]
    for feature, grp in table.groupby("feature", sort=False):
        cells = []
        for t in targets:
            r = grp[grp["snr_target"] == t].iloc[0]
            if math.isnan(r["p_value"]):
                cells.append("n/a")
            else:
                text = f"{r['p_value']:.4f}"
                cells.append(f"**{text}**" if r["significant"] else text)
        lines.append(f"| {FEATURE_LABELS.get(feature, feature)} | " + " | ".join(cells) + " |")
    snr_line = ", ".join(f"{t:.2f} -> s={int(grp['s'].iloc[0])} (SNR {grp['snr'].iloc[0]:.3f})"
                         for t, grp in table.groupby("snr_target", sort=False))
    lines += ["", f"Bold: p < {report.corrected_alpha:.4g} (Bonferroni, {report.m_tests} tests). "
              f"Uncorrected FWER {report.fwer_uncorrected:.3f}.", f"Increments used: {snr_line}."]
    return "\n".join(lines) + "\n"
