"""Synthetic test signals and additive/convolutional degradations."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
import scipy.signal

from .signal import TimeSeries

__all__ = [
    "ButterworthSpec",
    "DegradeSpec",
    "gen_square",
    "gen_fm_sawtooth",
    "simulation_f0",
    "butterworth_sos",
    "butterworth_apply",
    "gen_pink",
    "mix_at_snr",
    "add_impulse",
    "degrade",
    "SimulationSignals",
    "build_simulation",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ButterworthSpec:
    order: int
    cutoff_hz: float
    kind: Literal["lowpass", "highpass"] = "lowpass"

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"filter order must be a positive integer, got {self.order}")
        if not self.cutoff_hz > 0:
            raise ValueError(f"cutoff must be positive, got {self.cutoff_hz}")
        if self.kind not in ("lowpass", "highpass"):
            raise ValueError(f"unknown filter kind {self.kind!r}")


@dataclass(frozen=True)
class DegradeSpec:
    """Degradation recipe: optional filter, then pink noise, then impulse.

    ``impulse_amplitude`` of ``None`` means 10x the peak of the (filtered)
    signal.
    """

    filter: ButterworthSpec | None = None
    snr_db: float | None = None
    impulse_seconds: float | None = None
    impulse_amplitude: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.snr_db is not None and not np.isfinite(self.snr_db):
            raise ValueError("SNR must be finite")


def gen_square(f0: float, duty: float, fs: float, duration: float) -> TimeSeries:
    """Bipolar square wave: +1 for the first ``duty`` fraction of each period."""
    if not 0 < duty < 1:
        raise ValueError(f"duty must be in (0, 1), got {duty}")
    if not 0 < f0 < fs / 2:
        raise ValueError(f"f0 must be in (0, fs/2), got {f0}")
    n = np.arange(int(round(duration * fs)))
    # integer arithmetic when the period is a whole number of samples
    period = fs / f0
    if float(period).is_integer():
        phase = (n % int(period)) / period
    else:
        phase = np.mod(f0 * n / fs, 1.0)
    return TimeSeries(np.where(phase < duty, 1.0, -1.0), fs)


def simulation_f0(n: np.ndarray, fs: float) -> np.ndarray:
    """Sawtooth F0 law of the simulation: 2.5 + cos(2 pi n / (10 fs)) Hz."""
    return 2.5 + np.cos(2 * np.pi * np.asarray(n, dtype=float) / (10 * fs))


def gen_fm_sawtooth(f0_law: Callable[[np.ndarray], np.ndarray], fs: float,
                    duration: float) -> TimeSeries:
    """Rising-ramp sawtooth whose phase integrates ``f0_law(n)`` (Hz) sample by sample."""
    n = np.arange(int(round(duration * fs)))
    f = np.broadcast_to(np.asarray(f0_law(n), dtype=float), n.shape)
    if np.any(f <= 0) or not np.all(np.isfinite(f)):
        raise ValueError("instantaneous frequency must be positive and finite")
    cycles = np.cumsum(f / fs)
    return TimeSeries(2.0 * np.mod(cycles, 1.0) - 1.0, fs)


def butterworth_sos(spec: ButterworthSpec, fs: float) -> np.ndarray:
    """Digital Butterworth as second-order sections (bilinear, prewarped)."""
    if not spec.cutoff_hz < fs / 2:
        raise ValueError(f"cutoff {spec.cutoff_hz} Hz is not below Nyquist ({fs / 2} Hz)")
    sos = scipy.signal.butter(spec.order, spec.cutoff_hz, btype=spec.kind, fs=fs,
                              output="sos")
    poles = np.concatenate([np.roots(s[3:]) for s in sos])
    if not np.all(np.isfinite(poles)) or np.max(np.abs(poles)) >= 1.0:
        raise ValueError(
            f"unstable {spec.order}th-order design at {spec.cutoff_hz} Hz (fs={fs})")
    return sos


def butterworth_apply(x: TimeSeries, spec: ButterworthSpec) -> TimeSeries:
    """Causal single-pass filtering."""
    sos = butterworth_sos(spec, x.sample_rate)
    return TimeSeries(scipy.signal.sosfilt(sos, x.samples), x.sample_rate)


def gen_pink(num_samples: int, fs: float, seed: int = 0) -> TimeSeries:
    """Zero-mean 1/f noise by spectral shaping of white Gaussian noise."""
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(num_samples)
    spec = np.fft.rfft(white)
    k = np.arange(spec.size)
    gain = np.zeros(spec.size)
    gain[1:] = 1.0 / np.sqrt(k[1:])
    y = np.fft.irfft(spec * gain, n=num_samples)
    std = y.std()
    return TimeSeries(y / std if std > 0 else y, fs)


def _power(v: np.ndarray) -> float:
    return float(np.mean(np.square(v)))


def mix_at_snr(signal: TimeSeries, noise: TimeSeries, snr_db: float) -> TimeSeries:
    """``signal + a * noise`` with ``a`` chosen so the mean-square SNR is ``snr_db``."""
    if len(signal) != len(noise) or signal.sample_rate != noise.sample_rate:
        raise ValueError("signal and noise must share length and sample rate")
    ps, pn = _power(signal.samples), _power(noise.samples)
    if ps <= 0 or pn <= 0:
        raise ValueError("signal and noise must both have nonzero power")
    alpha = np.sqrt(ps / (pn * 10.0 ** (snr_db / 10.0)))
    return TimeSeries(signal.samples + alpha * noise.samples, signal.sample_rate)


def add_impulse(x: TimeSeries, at_seconds: float, amplitude: float) -> TimeSeries:
    if not 0 <= at_seconds < x.duration:
        raise ValueError(f"impulse time {at_seconds} s outside [0, {x.duration})")
    idx = min(int(round(at_seconds * x.sample_rate)), len(x) - 1)
    out = x.samples.copy()
    out[idx] += amplitude
    return TimeSeries(out, x.sample_rate)


def degrade(x: TimeSeries, spec: DegradeSpec) -> TimeSeries:
    if spec.filter is not None:
        x = butterworth_apply(x, spec.filter)
    if spec.snr_db is not None:
        x = mix_at_snr(x, gen_pink(len(x), x.sample_rate, spec.seed), spec.snr_db)
    if spec.impulse_seconds is not None:
        amp = spec.impulse_amplitude
        if amp is None:
            amp = 10.0 * float(np.max(np.abs(x.samples)))
        x = add_impulse(x, spec.impulse_seconds, amp)
    return x


@dataclass(frozen=True)
class SimulationSignals:
    x1: TimeSeries
    x2: TimeSeries
    clean: TimeSeries
    noisy: TimeSeries


def build_simulation(fs: float = 1000.0, duration: float = 100.0, *, order: int = 10,
                     cutoff_hz: float = 10.0, snr_db: float | None = 10.0,
                     impulse_seconds: float | None = 80.0,
                     impulse_amplitude: float | None = None,
                     seed: int = 0) -> SimulationSignals:
    """Square wave through a lowpass plus FM sawtooth through a highpass, then noise.

    ``clean`` carries the convolutional degradation only; ``noisy`` adds pink
    noise at ``snr_db`` and an impulse at ``impulse_seconds``.
    """
    sq = gen_square(2.0, 0.2, fs, duration)
    saw = gen_fm_sawtooth(lambda n: simulation_f0(n, fs), fs, duration)
    x1 = butterworth_apply(sq, ButterworthSpec(order, cutoff_hz, "lowpass"))
    x2 = butterworth_apply(saw, ButterworthSpec(order, cutoff_hz, "highpass"))
    clean = TimeSeries(x1.samples + x2.samples, fs)
    noisy = degrade(clean, DegradeSpec(None, snr_db, impulse_seconds, impulse_amplitude, seed))
    return SimulationSignals(x1, x2, clean, noisy)
