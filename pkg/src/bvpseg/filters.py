"""Butterworth IIR design (bilinear transform) and cascaded biquad filtering.

Designs are built from the analog prototype: prototype poles on the unit
circle, a lowpass-to-bandpass or lowpass-to-highpass substitution at the
pre-warped edge frequencies, then the bilinear map ``z = (2fs + s)/(2fs - s)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.signal import sosfilt

from .errors import (FrequencyOutOfRange, InvalidBand, SampleRateMismatch,
                     SegmentTooShort, UnsupportedOrder)
from .signal import Signal

KINDS = ("bandpass", "highpass")


@dataclass(frozen=True, eq=False)
class FilterDesign:
    """Cascade of second-order sections.

    ``sos`` has one row ``(b0, b1, b2, 1, a1, a2)`` per section. First-order
    sections carry ``b2 = a2 = 0``.
    """

    sos: np.ndarray
    order: int
    kind: str
    cutoffs_hz: tuple
    fs_hz: float
    zero_phase: bool = False

    def __post_init__(self):
        sos = np.array(self.sos, dtype=float)
        sos.flags.writeable = False
        object.__setattr__(self, "sos", sos)

    @property
    def n_sections(self) -> int:
        return self.sos.shape[0]

    def poles(self) -> np.ndarray:
        out = []
        for _, _, _, _, a1, a2 in self.sos:
            out.extend(np.roots([1.0, a1, a2]) if a2 != 0 else np.roots([1.0, a1]))
        return np.array(out)

    def coefficient_table(self) -> str:
        """CSV text with columns section,b0,b1,b2,a1,a2."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "b0", "b1", "b2", "a1", "a2"])
        for i, (b0, b1, b2, _, a1, a2) in enumerate(self.sos):
            w.writerow([i] + [repr(float(v)) for v in (b0, b1, b2, a1, a2)])
        return buf.getvalue()


def _prototype_poles(order: int) -> np.ndarray:
    k = np.arange(1, order + 1)
    return np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))


def _pair_sections(zeros: np.ndarray, poles: np.ndarray, gain: float) -> np.ndarray:
    """Group poles into conjugate pairs and attach the nearest zeros."""
    poles = list(poles)
    zeros = list(zeros)
    sections = []
    while poles:
        # most sensitive pole (closest to the unit circle) first
        i = int(np.argmin([1.0 - abs(p) for p in poles]))
        p = poles.pop(i)
        if abs(p.imag) > 1e-12:
            j = int(np.argmin([abs(q - np.conj(p)) for q in poles]))
            pair = [p, poles.pop(j)]
        else:
            p = complex(p.real, 0.0)
            reals = [k for k, q in enumerate(poles) if abs(q.imag) <= 1e-12]
            if reals:
                j = min(reals, key=lambda k: abs(poles[k] - p))
                pair = [p, complex(poles.pop(j).real, 0.0)]
            else:
                pair = [p]
        zsel = []
        for _ in range(len(pair)):
            if not zeros:
                break
            j = int(np.argmin([abs(z - pair[0]) for z in zeros]))
            z = zeros.pop(j)
            if abs(z.imag) > 1e-12 and zeros:
                # keep conjugate zeros together
                jc = int(np.argmin([abs(q - np.conj(z)) for q in zeros]))
                zsel.extend([z, zeros.pop(jc)])
                break
            zsel.append(z)
        a = np.real(np.poly(pair))
        b = np.real(np.poly(zsel)) if zsel else np.array([1.0])
        a = np.concatenate((a, np.zeros(3 - a.size)))
        b = np.concatenate((np.zeros(len(pair) - len(zsel)), b))
        b = np.concatenate((b, np.zeros(3 - b.size)))
        sections.append(np.concatenate((b, a)))
    sos = np.array(sections)
    sos[0, :3] *= gain
    return sos


def _sos_response(sos: np.ndarray, f_hz, fs_hz: float) -> np.ndarray:
    z = np.exp(2j * np.pi * np.asarray(f_hz, dtype=float) / fs_hz)
    zi = 1.0 / z
    h = np.ones_like(z)
    for b0, b1, b2, a0, a1, a2 in sos:
        h = h * (b0 + b1 * zi + b2 * zi**2) / (a0 + a1 * zi + a2 * zi**2)
    return h


def design_butterworth(order: int, kind: str, f_low_hz: float, f_high_hz: float | None,
                       fs_hz: float, zero_phase: bool = False) -> FilterDesign:
    """Design a digital Butterworth filter as second-order sections.

    ``order`` is the analog prototype order, so a bandpass design has
    ``2 * order`` poles. For ``kind="highpass"`` the cutoff is ``f_low_hz``
    and ``f_high_hz`` is ignored.
    """
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= 8:
        raise UnsupportedOrder(f"order must be an integer in 1..8, got {order!r}")
    if kind not in KINDS:
        raise InvalidBand(f"unknown filter kind {kind!r}")
    nyq = fs_hz / 2.0
    fs2 = 2.0 * fs_hz
    proto = _prototype_poles(order)

    if kind == "bandpass":
        if f_high_hz is None or not 0 < f_low_hz < f_high_hz < nyq:
            raise InvalidBand(f"need 0 < f_low < f_high < fs/2, got {f_low_hz}, {f_high_hz}, fs={fs_hz}")
        w_lo = fs2 * np.tan(np.pi * f_low_hz / fs_hz)
        w_hi = fs2 * np.tan(np.pi * f_high_hz / fs_hz)
        bw = w_hi - w_lo
        w0 = np.sqrt(w_lo * w_hi)
        pb = proto * bw / 2.0
        root = np.sqrt(pb**2 - w0**2)
        s_poles = np.concatenate((pb + root, pb - root))
        z_poles = (fs2 + s_poles) / (fs2 - s_poles)
        z_zeros = np.concatenate((np.ones(order), -np.ones(order))).astype(complex)
        # analog bandpass has unit gain at w0; map it back through the warp
        f_ref = fs_hz / np.pi * np.arctan(w0 / fs2)
        cutoffs = (float(f_low_hz), float(f_high_hz))
    else:
        if not 0 < f_low_hz < nyq:
            raise InvalidBand(f"need 0 < f_cut < fs/2, got {f_low_hz}, fs={fs_hz}")
        wc = fs2 * np.tan(np.pi * f_low_hz / fs_hz)
        s_poles = wc / proto
        z_poles = (fs2 + s_poles) / (fs2 - s_poles)
        z_zeros = np.ones(order, dtype=complex)
        f_ref = nyq
        cutoffs = (float(f_low_hz),)

    sos = _pair_sections(z_zeros, z_poles, 1.0)
    gain = 1.0 / abs(_sos_response(sos, f_ref, fs_hz))
    sos[0, :3] *= gain
    design = FilterDesign(sos, int(order), kind, cutoffs, float(fs_hz), zero_phase)
    if np.any(np.abs(design.poles()) >= 1.0 - 1e-9):
        raise InvalidBand("design is numerically unstable for this band")
    return design


def frequency_response(design: FilterDesign, f_hz):
    """Complex response of the cascade at ``f_hz`` (scalar or array)."""
    f = np.asarray(f_hz, dtype=float)
    if np.any(f < 0) or np.any(f > design.fs_hz / 2.0):
        raise FrequencyOutOfRange(f"frequency must lie in [0, {design.fs_hz / 2}]")
    h = _sos_response(design.sos, f, design.fs_hz)
    return complex(h) if h.ndim == 0 else h


def section_responses(design: FilterDesign, f_hz) -> list:
    return [complex(_sos_response(design.sos[i:i + 1], f_hz, design.fs_hz))
            for i in range(design.n_sections)]


def filter_array(design: FilterDesign, x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Run the cascade over ``x`` along ``axis`` from zero initial state."""
    sos = np.array(design.sos)
    y = sosfilt(sos, x, axis=axis)
    if design.zero_phase:
        y = np.flip(sosfilt(sos, np.flip(y, axis=axis), axis=axis), axis=axis)
    return y


def apply_filter(design: FilterDesign, signal: Signal) -> Signal:
    if abs(signal.sample_rate_hz - design.fs_hz) > 1e-9:
        raise SampleRateMismatch(
            f"design is for {design.fs_hz} Hz, signal is sampled at {signal.sample_rate_hz} Hz")
    if len(signal) < 3 * design.n_sections:
        raise SegmentTooShort(f"{len(signal)} samples is too short for {design.n_sections} sections")
    return signal.with_samples(filter_array(design, signal.samples))


def lfilter_df2t(design: FilterDesign, x) -> np.ndarray:
    """Slow reference cascade in plain Python (direct form II transposed)."""
    y = [float(v) for v in x]
    for b0, b1, b2, _, a1, a2 in design.sos:
        s1 = s2 = 0.0
        out = []
        for v in y:
            o = b0 * v + s1
            s1 = b1 * v - a1 * o + s2
            s2 = b2 * v - a2 * o
            out.append(o)
        y = out
    return np.array(y)
