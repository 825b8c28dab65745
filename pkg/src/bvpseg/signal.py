"""Waveform types, synthetic BVP generation and signal file I/O."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptySignal, InvalidConfig, MissingHeader, ParseError


@dataclass(frozen=True, eq=False)
class Signal:
    """Uniformly sampled single-channel waveform.

    The sample array is copied on construction and marked read-only, so a
    Signal can be shared freely between threads.
    """

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        x = np.array(self.samples, dtype=float, copy=True).ravel()
        if x.size == 0:
            raise EmptySignal("signal has no samples")
        if not np.all(np.isfinite(x)):
            raise ValueError("signal contains non-finite samples")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def with_samples(self, samples) -> "Signal":
        return Signal(samples, self.sample_rate_hz)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """One-sided DFT bins (k = 0..N//2) of an N-sample segment."""

    bins: np.ndarray
    bin_width_hz: float
    n_samples: int
    scaling: float

    @property
    def real(self) -> np.ndarray:
        return self.bins.real

    @property
    def imag(self) -> np.ndarray:
        return self.bins.imag


@dataclass(frozen=True)
class SynthesisConfig:
    """Parameters of the two-Gaussian pulse generator.

    Widths and positions are fractions of the beat period, so the pulse
    morphology scales with heart rate.
    """

    heart_rate_bpm: float = 70.0
    sample_rate_hz: float = 64.0
    duration_s: float = 300.0
    systolic_amplitude: float = 1.0
    systolic_width: float = 0.07
    systolic_phase: float = 0.2
    dicrotic_amplitude: float = 0.35
    dicrotic_width: float = 0.1
    dicrotic_offset: float = 0.3
    jitter: float = 0.0

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))

    @property
    def beat_period_s(self) -> float:
        return 60.0 / self.heart_rate_bpm

    def validate(self) -> None:
        if not 30.0 <= self.heart_rate_bpm <= 220.0:
            raise InvalidConfig(f"heart_rate_bpm {self.heart_rate_bpm} outside [30, 220]")
        if not self.sample_rate_hz > 0 or not self.duration_s > 0:
            raise InvalidConfig("sample_rate_hz and duration_s must be positive")
        n = self.duration_s * self.sample_rate_hz
        if abs(n - round(n)) > 1e-9 or round(n) < 2:
            raise InvalidConfig(f"duration_s * sample_rate_hz = {n} is not an integer >= 2")
        for name in ("systolic_amplitude", "systolic_width", "dicrotic_amplitude",
                     "dicrotic_width", "dicrotic_offset"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"{name} must be positive")
        if not 0.0 <= self.jitter <= 0.01:
            raise InvalidConfig("jitter must lie in [0, 0.01] (fraction of the beat period)")


def _pulse(phase: np.ndarray, cfg: SynthesisConfig) -> np.ndarray:
    """Template value at beat phase (in periods, may lie outside [0, 1))."""
    sys_c = cfg.systolic_phase
    dic_c = cfg.systolic_phase + cfg.dicrotic_offset
    return (cfg.systolic_amplitude * np.exp(-0.5 * ((phase - sys_c) / cfg.systolic_width) ** 2)
            + cfg.dicrotic_amplitude * np.exp(-0.5 * ((phase - dic_c) / cfg.dicrotic_width) ** 2))


def synthesize_bvp(config: SynthesisConfig | None = None, seed: int = 0) -> Signal:
    """Synthesize a clean BVP waveform.

    Each beat is the sum of a systolic and a dicrotic Gaussian. Beats are
    tiled at ``60 / heart_rate_bpm`` seconds; with ``jitter > 0`` every beat
    period is perturbed uniformly by up to ``jitter`` of its length, drawn
    from ``seed``. The result has zero mean and unit peak magnitude.
    """
    cfg = config or SynthesisConfig()
    cfg.validate()
    n = cfg.n_samples
    fs = cfg.sample_rate_hz
    period = cfg.beat_period_s
    t = np.arange(n) / fs

    n_beats = int(math.ceil(cfg.duration_s / period)) + 3
    if cfg.jitter > 0:
        rng = np.random.default_rng(seed)
        periods = period * (1.0 + rng.uniform(-cfg.jitter, cfg.jitter, n_beats))
        onsets = np.concatenate(([-periods[0]], [0.0], np.cumsum(periods[1:-1])))
    else:
        periods = np.full(n_beats, period)
        onsets = (np.arange(n_beats) - 1.0) * period
    # onsets[0] is a padding beat before t=0 so its tail wraps in consistently

    k = np.searchsorted(onsets, t, side="right") - 1
    x = np.zeros(n)
    # tails of the previous and next beats reach into the current one
    for shift in (-1, 0, 1):
        j = np.clip(k + shift, 0, n_beats - 1)
        x += _pulse((t - onsets[j]) / periods[j], cfg)

    x -= x.mean()
    x /= np.max(np.abs(x))
    return Signal(x, fs)


def load_signal(path) -> Signal:
    """Read a signal CSV: a ``# fs=<rate>`` header then one sample per line."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise MissingHeader(f"{path}: first line must be '# fs=<rate>'")
    header = lines[0][1:].strip()
    if not header.startswith("fs="):
        raise MissingHeader(f"{path}: header {lines[0]!r} lacks a sample-rate declaration")
    try:
        fs = float(header[3:])
    except ValueError as exc:
        raise ParseError(f"{path}: bad sample rate in header {lines[0]!r}") from exc
    values = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: cannot parse {line!r}") from exc
    if not values:
        raise EmptySignal(f"{path}: no samples")
    return Signal(np.array(values), fs)


def format_float(value: float, digits: int | None = None) -> str:
    if digits is None:
        return repr(float(value))
    return f"{value:.{digits}g}"


def save_signal(signal: Signal, path, digits: int | None = None) -> None:
    """Write ``signal`` in the format read by :func:`load_signal`.

    By default samples are written with the shortest representation that
    round-trips exactly; pass ``digits`` for fixed significant digits.
    """
    path = Path(path)
    lines = [f"# fs={format_float(signal.sample_rate_hz)}"]
    lines.extend(format_float(v, digits) for v in signal.samples)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
