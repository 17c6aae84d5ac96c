"""Multi-layered cepstrum: repeated DFT, index high-pass and power rectifier.

Layer 0 is the power-scaled magnitude spectrogram.  Each further layer takes
the real DFT of every frame column of the previous layer, zeroes the indices
at or below the cutoff (and their mirror images), and applies the power
rectifier.  Even layers live on the frequency axis, odd layers on the
quefrency axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .signal import (
    Spectrogram,
    TimeSeries,
    WindowSpec,
    highpass_mask,
    power_activation,
    real_dft,
    stft_magnitude,
)

__all__ = [
    "MAX_LAYERS",
    "LayerParams",
    "MlcConfig",
    "LayerStack",
    "compute_layer0",
    "compute_next_layer",
    "compute_stack",
    "layer_arrays",
]

MAX_LAYERS = 16


@dataclass(frozen=True)
class LayerParams:
    gamma: float
    cutoff_index: int

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.cutoff_index < 0:
            raise ValueError(f"cutoff index must be >= 0, got {self.cutoff_index}")


@dataclass(frozen=True)
class MlcConfig:
    """Parameters of an ``L``-layer stack.

    ``gammas`` holds one exponent per layer (``L + 1`` values).  The
    frequency cutoff is applied on even layers >= 2 and the quefrency
    cutoff on odd layers.
    """

    window: WindowSpec
    gammas: tuple[float, ...]
    cutoff_frequency_hz: float = 27.5
    cutoff_quefrency_s: float = 0.24e-3

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if len(self.gammas) < 1:
            raise ValueError("need at least one gamma")
        if self.num_layers > MAX_LAYERS:
            raise ValueError(f"at most {MAX_LAYERS} layers supported, got {self.num_layers}")
        if any(not g > 0 for g in self.gammas):
            raise ValueError(f"all gammas must be positive, got {self.gammas}")
        if self.cutoff_frequency_hz < 0 or self.cutoff_quefrency_s < 0:
            raise ValueError("cutoffs must be nonnegative")

    @property
    def num_layers(self) -> int:
        return len(self.gammas) - 1

    def cutoff_indices(self, sample_rate: float) -> tuple[int, int]:
        """``(k_c, n_c)`` for the given rate; raises if either reaches N/2."""
        n = self.window.dft_size
        k_c = int(round(self.cutoff_frequency_hz * n / sample_rate))
        n_c = int(round(self.cutoff_quefrency_s * sample_rate))
        if not k_c < n / 2:
            raise ValueError(f"frequency cutoff index {k_c} must be < N/2 = {n / 2}")
        if not n_c < n / 2:
            raise ValueError(f"quefrency cutoff index {n_c} must be < N/2 = {n / 2}")
        return k_c, n_c

    def layer_params(self, sample_rate: float) -> list[LayerParams]:
        """Parameters for layers 1..L (layer 0 has no mask)."""
        k_c, n_c = self.cutoff_indices(sample_rate)
        return [LayerParams(g, n_c if l % 2 else k_c)
                for l, g in enumerate(self.gammas) if l > 0]

    def with_gammas(self, gammas: Sequence[float]) -> "MlcConfig":
        return MlcConfig(self.window, tuple(gammas), self.cutoff_frequency_hz,
                         self.cutoff_quefrency_s)


@dataclass(frozen=True)
class LayerStack:
    layers: tuple[Spectrogram, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        for l, z in enumerate(self.layers):
            want = "frequency" if l % 2 == 0 else "quefrency"
            if z.axis != want:
                raise ValueError(f"layer {l} must be on the {want} axis, got {z.axis}")
        shapes = {z.values.shape for z in self.layers}
        if len(shapes) > 1:
            raise ValueError(f"layers disagree in shape: {shapes}")

    def __len__(self) -> int:
        return len(self.layers)

    def __getitem__(self, l: int) -> Spectrogram:
        return self.layers[l]

    @property
    def num_layers(self) -> int:
        return len(self.layers) - 1


def compute_layer0(magnitudes: Spectrogram, gamma0: float) -> Spectrogram:
    if magnitudes.axis != "frequency":
        raise ValueError("layer 0 input must be on the frequency axis")
    return Spectrogram(power_activation(magnitudes.values, gamma0), "frequency",
                       magnitudes.sample_rate, magnitudes.frame_hop_seconds,
                       magnitudes.time_offset)


def _next_layer_values(prev: np.ndarray, gamma: float, mask: np.ndarray | None) -> np.ndarray:
    pre = real_dft(prev, axis=0)
    if mask is not None:
        pre *= mask[:, None]
    return power_activation(pre, gamma)


def compute_next_layer(prev: Spectrogram, params: LayerParams) -> Spectrogram:
    mask = highpass_mask(prev.size, params.cutoff_index)
    values = _next_layer_values(prev.values, params.gamma, mask)
    axis = "quefrency" if prev.axis == "frequency" else "frequency"
    return Spectrogram(values, axis, prev.sample_rate, prev.frame_hop_seconds,
                       prev.time_offset)


def layer_arrays(magnitudes: np.ndarray, gammas: Sequence[float],
                 k_c: int | None, n_c: int | None) -> list[np.ndarray]:
    """Array-level stack used by the batch pipelines.

    ``magnitudes`` is ``N x m``.  A cutoff of ``None`` disables the mask for
    that layer parity entirely (index 0 is kept too).
    """
    n = magnitudes.shape[0]
    masks = {c: (None if c is None else highpass_mask(n, c)) for c in (k_c, n_c)}
    out = [power_activation(magnitudes, gammas[0])]
    for l in range(1, len(gammas)):
        cut = n_c if l % 2 else k_c
        out.append(_next_layer_values(out[-1], gammas[l], masks[cut]))
    return out


def compute_stack(x: TimeSeries, config: MlcConfig) -> LayerStack:
    """Layers ``Z0..ZL`` of ``x`` under ``config``."""
    params = config.layer_params(x.sample_rate)
    z = compute_layer0(stft_magnitude(x, config.window), config.gammas[0])
    layers = [z]
    for p in params:
        z = compute_next_layer(z, p)
        layers.append(z)
    return LayerStack(tuple(layers))
