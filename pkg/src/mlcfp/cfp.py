"""Frequency/periodicity fusion and the 88-band pitch projection."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mlc import LayerStack, layer_arrays
from .signal import Spectrogram

__all__ = [
    "MIDI_LOW",
    "MIDI_HIGH",
    "NUM_PITCHES",
    "CfpRepresentation",
    "LogFreqBank",
    "quefrency_index",
    "quefrency_lookup",
    "fuse",
    "fuse_arrays",
    "fuse_stack",
    "fusion_pair",
    "project_to_bands",
    "salience_from_magnitudes",
]

MIDI_LOW, MIDI_HIGH = 21, 108
NUM_PITCHES = MIDI_HIGH - MIDI_LOW + 1


@dataclass(frozen=True)
class CfpRepresentation:
    values: np.ndarray
    layers: tuple[int, int]
    sample_rate: float
    frame_hop_seconds: float
    time_offset: float = 0.0

    def __post_init__(self):
        l_e, l_o = self.layers
        if l_e % 2 or not l_o % 2:
            raise ValueError(f"layer pair must be (even, odd), got {self.layers}")
        if np.any(self.values < 0):
            raise ValueError("fused values must be nonnegative")

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def as_spectrogram(self) -> Spectrogram:
        return Spectrogram(self.values, "frequency", self.sample_rate,
                           self.frame_hop_seconds, self.time_offset)


def _round_half_away(v: float) -> int:
    return int(math.floor(abs(v) + 0.5)) * (1 if v >= 0 else -1)


def quefrency_index(k: int, size: int) -> int:
    """Quefrency bin paired with frequency bin ``k``: ``N/k`` rounded half away from zero.

    Raises ``ValueError`` for ``k = 0`` or when the paired bin falls outside
    the frame (``>= N``).
    """
    if k < 1:
        raise ValueError(f"frequency bin must be >= 1, got {k}")
    # exact integer arithmetic for the half case: round(N/k) = floor((2N + k) / 2k)
    q = (2 * size + k) // (2 * k)
    if q >= size:
        raise ValueError(f"bin {k} maps to quefrency {q} >= N = {size}")
    return q


def quefrency_lookup(size: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised pairing for ``k = 1..N//2``: ``(k, q)`` with invalid ``q`` set to -1."""
    k = np.arange(1, size // 2 + 1)
    q = (2 * size + k) // (2 * k)
    q[q >= size] = -1
    return k, q


def fuse_arrays(z_freq: np.ndarray, z_quef: np.ndarray) -> np.ndarray:
    """Array form of :func:`fuse`; both inputs ``N x m``."""
    n = z_freq.shape[0]
    k, q = quefrency_lookup(n)
    valid = q >= 0
    out = np.zeros_like(z_freq)
    kv, qv = k[valid], q[valid]
    out[kv] = z_freq[kv] * z_quef[qv]
    # mirror to the upper half; the Nyquist bin of even N is its own mirror
    upper = n - kv
    keep = upper > n // 2
    out[upper[keep]] = out[kv[keep]]
    return out


def fuse(z_freq: Spectrogram, z_quef: Spectrogram, layers: tuple[int, int] = (2, 1)) -> CfpRepresentation:
    """Multiply each frequency bin by the quefrency bin at the matching period."""
    if z_freq.axis != "frequency" or z_quef.axis != "quefrency":
        raise ValueError("fuse needs a frequency-axis and a quefrency-axis input")
    if z_freq.values.shape != z_quef.values.shape:
        raise ValueError(
            f"shape mismatch: {z_freq.values.shape} vs {z_quef.values.shape}")
    return CfpRepresentation(fuse_arrays(z_freq.values, z_quef.values), layers,
                             z_freq.sample_rate, z_freq.frame_hop_seconds,
                             z_freq.time_offset)


def fusion_pair(num_layers: int) -> tuple[int, int]:
    """``(l_e, l_o)`` for the last two layers of an ``L``-layer stack (L >= 1)."""
    if num_layers < 1:
        raise ValueError("fusion needs at least two layers (L >= 1)")
    if num_layers % 2:
        return num_layers - 1, num_layers
    return num_layers, num_layers - 1


def fuse_stack(stack: LayerStack) -> CfpRepresentation:
    l_e, l_o = fusion_pair(stack.num_layers)
    return fuse(stack[l_e], stack[l_o], (l_e, l_o))


@dataclass(frozen=True)
class LogFreqBank:
    """88 rectangular semitone bands, A0..C8, edges a quarter tone from each center."""

    tuning_hz: float = 440.0

    @property
    def midi(self) -> np.ndarray:
        return np.arange(MIDI_LOW, MIDI_HIGH + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.tuning_hz * 2.0 ** ((self.midi - 69) / 12)

    @property
    def edges(self) -> np.ndarray:
        """89 band edges; band ``b`` is ``[edges[b], edges[b + 1])``."""
        m = np.arange(MIDI_LOW, MIDI_HIGH + 2) - 0.5
        return self.tuning_hz * 2.0 ** ((m - 69) / 12)

    def band_of_bins(self, size: int, sample_rate: float) -> np.ndarray:
        """Band index of each bin ``0..N//2`` (``-1`` when outside every band)."""
        freqs = np.arange(size // 2 + 1) * sample_rate / size
        band = np.searchsorted(self.edges, freqs, side="right") - 1
        band[(band < 0) | (band >= NUM_PITCHES)] = -1
        band[0] = -1
        return band

    def matrix(self, size: int, sample_rate: float) -> np.ndarray:
        """``88 x N`` 0/1 summation matrix (upper-half bins never included)."""
        band = self.band_of_bins(size, sample_rate)
        mat = np.zeros((NUM_PITCHES, size))
        idx = np.nonzero(band >= 0)[0]
        mat[band[idx], idx] = 1.0
        return mat


def project_to_bands(y: CfpRepresentation, bank: LogFreqBank | None = None) -> np.ndarray:
    """``88 x M`` salience: plain sum of fused bins per band (empty bands stay 0)."""
    bank = bank or LogFreqBank()
    return bank.matrix(y.size, y.sample_rate) @ y.values


def salience_from_magnitudes(magnitudes: np.ndarray, gammas: Sequence[float],
                             k_c: int, n_c: int, band_matrix: np.ndarray) -> np.ndarray:
    """Magnitudes (``N x m``) straight to 88-band salience for ``len(gammas) - 1`` layers."""
    layers = layer_arrays(magnitudes, gammas, k_c, n_c)
    l_e, l_o = fusion_pair(len(gammas) - 1)
    return band_matrix @ fuse_arrays(layers[l_e], layers[l_o])
