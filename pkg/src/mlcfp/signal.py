"""Short-time analysis primitives shared by the cepstral stack.

All transforms here use the forward, unnormalised DFT and keep the full
two-sided spectrum, so every matrix handed upward is ``N x M`` (bins by
frames).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.fft

__all__ = [
    "TimeSeries",
    "WindowSpec",
    "Spectrogram",
    "make_window",
    "frame_signal",
    "stft_magnitude",
    "power_activation",
    "highpass_mask",
    "real_dft",
]

# 4-term Blackman-Harris (minimum 4-term, -92 dB sidelobes)
_BH4 = (0.35875, 0.48829, 0.14128, 0.01168)


@dataclass(frozen=True)
class TimeSeries:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 1 or x.size < 1:
            raise ValueError("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class WindowSpec:
    """Analysis window, DFT size and hop, all in samples.

    ``window_length`` defaults to ``dft_size`` (no zero padding).
    """

    dft_size: int
    hop: int
    window_length: int | None = None
    kind: Literal["blackman_harris", "rectangular"] = "blackman_harris"

    def __post_init__(self):
        if self.window_length is None:
            object.__setattr__(self, "window_length", self.dft_size)
        if not 0 < self.window_length <= self.dft_size:
            raise ValueError(
                f"need 0 < window_length <= dft_size, got {self.window_length}, {self.dft_size}")
        if self.hop < 1:
            raise ValueError(f"hop must be >= 1, got {self.hop}")
        if self.kind not in ("blackman_harris", "rectangular"):
            raise ValueError(f"unsupported window kind {self.kind!r}")

    @classmethod
    def from_seconds(cls, fs: float, dft_size: int, hop_seconds: float,
                     window_length: int | None = None, kind: str = "blackman_harris"):
        return cls(dft_size=int(dft_size), hop=max(1, int(round(hop_seconds * fs))),
                   window_length=window_length, kind=kind)


@dataclass(frozen=True)
class Spectrogram:
    """Nonnegative ``N x M`` matrix on a frequency or quefrency axis.

    ``bin_step`` is Hz per bin on the frequency axis and seconds per bin on
    the quefrency axis.
    """

    values: np.ndarray
    axis: Literal["frequency", "quefrency"]
    sample_rate: float
    frame_hop_seconds: float
    time_offset: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] < 1:
            raise ValueError("values must be an N x M matrix with M >= 1")
        if self.axis not in ("frequency", "quefrency"):
            raise ValueError(f"unknown axis {self.axis!r}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("spectrogram values must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def num_frames(self) -> int:
        return self.values.shape[1]

    @property
    def bin_step(self) -> float:
        if self.axis == "frequency":
            return self.sample_rate / self.size
        return 1.0 / self.sample_rate

    def bin_positions(self) -> np.ndarray:
        return np.arange(self.size) * self.bin_step

    def frame_times(self) -> np.ndarray:
        return self.time_offset + np.arange(self.num_frames) * self.frame_hop_seconds


def make_window(spec: WindowSpec) -> np.ndarray:
    """Symmetric analysis window of ``spec.window_length`` samples."""
    L = spec.window_length
    if spec.kind == "rectangular":
        return np.ones(L)
    if spec.kind != "blackman_harris":
        raise ValueError(f"unsupported window kind {spec.kind!r}")
    if L == 1:
        return np.ones(1)
    a0, a1, a2, a3 = _BH4
    t = 2.0 * np.pi * np.arange(L) / (L - 1)
    w = a0 - a1 * np.cos(t) + a2 * np.cos(2 * t) - a3 * np.cos(3 * t)
    # enforce exact symmetry against rounding in cos
    return 0.5 * (w + w[::-1])


def frame_signal(x: np.ndarray, window_length: int, hop: int) -> np.ndarray:
    """Read-only ``(M, window_length)`` view of the frames of ``x``.

    Frames start at sample 0 with no centering; a trailing partial frame is
    dropped.
    """
    x = np.ascontiguousarray(x, dtype=float)
    if x.size < window_length:
        raise ValueError(
            f"signal has {x.size} samples, shorter than one window ({window_length})")
    m = (x.size - window_length) // hop + 1
    return np.lib.stride_tricks.as_strided(
        x, shape=(m, window_length), strides=(x.strides[0] * hop, x.strides[0]),
        writeable=False)


def stft_magnitudes_of_frames(frames: np.ndarray, window: np.ndarray,
                              dft_size: int) -> np.ndarray:
    """``N x m`` magnitude matrix for a stack of ``(m, window_length)`` frames."""
    spec = scipy.fft.fft(frames * window, n=dft_size, axis=1)
    return np.abs(spec).T


def stft_magnitude(x: TimeSeries, spec: WindowSpec) -> Spectrogram:
    frames = frame_signal(x.samples, spec.window_length, spec.hop)
    mags = stft_magnitudes_of_frames(frames, make_window(spec), spec.dft_size)
    return Spectrogram(mags, "frequency", x.sample_rate, spec.hop / x.sample_rate,
                       time_offset=0.5 * spec.window_length / x.sample_rate)


def power_activation(v, gamma: float) -> np.ndarray:
    """Power-law rectifier: ``v**gamma`` where ``v > 0`` and 0 elsewhere."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = v[pos] ** gamma
    return out


def highpass_mask(size: int, cutoff_index: int) -> np.ndarray:
    """0/1 diagonal of the index high-pass: keeps ``cutoff < i < size - cutoff``."""
    if not 0 <= cutoff_index < size / 2:
        raise ValueError(
            f"cutoff index {cutoff_index} must satisfy 0 <= i_c < N/2 (N={size})")
    i = np.arange(size)
    return ((i > cutoff_index) & (i < size - cutoff_index)).astype(float)


def real_dft(v, axis: int = 0) -> np.ndarray:
    """Real part of the forward unnormalised DFT along ``axis``."""
    v = np.asarray(v, dtype=float)
    if v.shape[axis] < 2:
        raise ValueError("real_dft needs at least 2 points")
    return scipy.fft.fft(v, axis=axis).real
