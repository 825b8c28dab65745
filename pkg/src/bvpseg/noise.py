"""Incremental noise corruption of a clean signal, with a per-sample noise mask.

Each increment ``i`` substitutes white noise over samples ``[L*i, L*(i+1))``,
adds a high-passed noise burst of length ``L`` at a random offset (version 2
and up) and, with probability ``impulse_prob``, a single signed impulse at a
random index (version 3). Per increment the stream is consumed in a fixed
order regardless of version:

    white block (L normals), burst offset r1, burst (L normals),
    impulse draw r2, impulse index r3, impulse sign

so the substituted blocks are identical across versions for a given seed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np

from .errors import (ConfigExceedsSignal, CutoffAboveNyquist, IncrementOutOfRange,
                     InvalidConfig, LengthMismatch)
from .filters import design_butterworth, filter_array
from .signal import Signal

CLEAN_MARKER = "clean"


class NoiseVersion(str, enum.Enum):
    V1 = "V1"
    V2 = "V2"
    V3 = "V3"

    @property
    def level(self) -> int:
        return int(self.value[1])


@dataclass(frozen=True)
class NoiseConfig:
    segment_len_s: float = 0.5
    substitution_s: float = 275.0
    total_increments: int | None = None
    white_noise_std: float = 3.1
    hf_noise_std: float = 0.25
    hf_cutoff_hz: float = 20.0
    hf_filter_order: int = 4
    impulse_prob: float = 0.1
    impulse_magnitude: float | None = None
    impulse_scale: float = 5.0
    version: NoiseVersion = NoiseVersion.V3

    def __post_init__(self):
        object.__setattr__(self, "version", NoiseVersion(self.version))

    def segment_len(self, fs: float) -> int:
        return int(round(self.segment_len_s * fs))

    def increments(self, fs: float) -> int:
        """Number of increments S; derived as round(substitution_s * fs / L) when unset."""
        if self.total_increments is not None:
            return int(self.total_increments)
        return int(round(self.substitution_s * fs / self.segment_len(fs)))

    def validate(self, clean: Signal) -> None:
        fs = clean.sample_rate_hz
        if self.segment_len(fs) < 1:
            raise InvalidConfig("segment_len_s * fs must be at least one sample")
        if not 0.0 <= self.impulse_prob <= 1.0:
            raise InvalidConfig(f"impulse_prob {self.impulse_prob} outside [0, 1]")
        if self.white_noise_std < 0 or self.hf_noise_std < 0:
            raise InvalidConfig("noise amplitudes must be non-negative")
        if self.increments(fs) < 1:
            raise InvalidConfig("need at least one noise increment")
        if self.increments(fs) * self.segment_len(fs) > len(clean):
            raise ConfigExceedsSignal(
                f"{self.increments(fs)} increments of {self.segment_len(fs)} samples exceed "
                f"a {len(clean)}-sample signal")
        if self.hf_cutoff_hz >= fs / 2:
            raise CutoffAboveNyquist(f"hf_cutoff_hz {self.hf_cutoff_hz} >= fs/2")

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["version"] = self.version.value
        return d


@dataclass(frozen=True, eq=False)
class NoisyVariant:
    signal: Signal
    mask: np.ndarray
    version: NoiseVersion
    increment_index: int


def as_generator(rng_stream) -> np.random.Generator:
    if isinstance(rng_stream, np.random.Generator):
        return rng_stream
    return np.random.default_rng(rng_stream)


@lru_cache(maxsize=32)
def _highpass(order: int, cutoff_hz: float, fs: float):
    return design_butterworth(order, "highpass", cutoff_hz, None, fs)


def band_limited_noise(length: int, cutoff_hz: float, std: float, fs: float, rng_stream,
                       order: int = 4) -> np.ndarray:
    """High-passed Gaussian noise rescaled to sample standard deviation ``std``."""
    if not cutoff_hz < fs / 2:
        raise CutoffAboveNyquist(f"cutoff {cutoff_hz} Hz is not below Nyquist ({fs / 2} Hz)")
    rng = as_generator(rng_stream)
    white = rng.standard_normal(length)
    y = filter_array(_highpass(order, float(cutoff_hz), float(fs)), white)
    sd = y.std()
    return y * (std / sd) if sd > 0 else y


def corrupt_sweep(clean: Signal, cfg: NoiseConfig, increments: Iterable[int],
                  rng_stream) -> Iterator[NoisyVariant]:
    """Yield the corrupted state after each requested number of increments.

    The corruption is cumulative, so a single pass over the stream serves
    every requested ``s``; results equal separate :func:`corrupt` calls made
    with the same stream seed.
    """
    cfg.validate(clean)
    fs = clean.sample_rate_hz
    n = len(clean)
    seg = cfg.segment_len(fs)
    total = cfg.increments(fs)
    wanted = sorted(set(int(s) for s in increments))
    if wanted and (wanted[0] < 0 or wanted[-1] > total):
        raise IncrementOutOfRange(f"increments must lie in [0, {total}]")
    rng = as_generator(rng_stream)
    level = cfg.version.level
    magnitude = (cfg.impulse_magnitude if cfg.impulse_magnitude is not None
                 else cfg.impulse_scale * float(np.max(np.abs(clean.samples))))

    y = np.array(clean.samples, dtype=float)
    mask = np.zeros(n, dtype=bool)
    done = 0
    for s in wanted:
        while done < s:
            i = done
            white = rng.normal(0.0, cfg.white_noise_std, seg) if cfg.white_noise_std > 0 else np.zeros(seg)
            r1 = int(rng.integers(0, n - seg + 1))
            burst = band_limited_noise(seg, cfg.hf_cutoff_hz, cfg.hf_noise_std, fs, rng,
                                       order=cfg.hf_filter_order)
            r2 = rng.random()
            r3 = int(rng.integers(0, n))
            sign = 1.0 if rng.random() < 0.5 else -1.0

            y[seg * i:seg * (i + 1)] = white
            mask[seg * i:seg * (i + 1)] = True
            if level >= 2:
                y[r1:r1 + seg] += burst
                mask[r1:r1 + seg] = True
            if level >= 3 and r2 < cfg.impulse_prob:
                y[r3] += sign * magnitude
                mask[r3] = True
            done += 1
        yield NoisyVariant(Signal(y, fs), mask.copy(), cfg.version, s)


def corrupt(clean: Signal, cfg: NoiseConfig, s: int, rng_stream) -> NoisyVariant:
    """State of the signal after ``s`` corruption increments."""
    total = cfg.increments(clean.sample_rate_hz)
    if not 0 <= s <= total:
        raise IncrementOutOfRange(f"s={s} outside [0, {total}]")
    return next(corrupt_sweep(clean, cfg, [s], rng_stream))


def compute_snr(clean: Signal, variant: NoisyVariant | Signal) -> float:
    """mean(|clean|) / std(noisy - clean); ``inf`` when the residual is zero."""
    noisy = variant.signal if isinstance(variant, NoisyVariant) else variant
    if len(noisy) != len(clean):
        raise LengthMismatch(f"lengths differ: {len(clean)} vs {len(noisy)}")
    sigma = float(np.std(noisy.samples - clean.samples))
    if sigma == 0.0:
        return float("inf")
    return float(np.mean(np.abs(clean.samples))) / sigma


def format_snr(snr: float) -> str:
    return CLEAN_MARKER if np.isinf(snr) else repr(float(snr))


def parse_snr(text: str) -> float:
    return float("inf") if text.strip() == CLEAN_MARKER else float(text)


def with_version(cfg: NoiseConfig, version) -> NoiseConfig:
    return replace(cfg, version=NoiseVersion(version))
