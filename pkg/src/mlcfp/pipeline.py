"""End-to-end estimation in bounded-memory frame chunks.

A full stack at the default 7939-point DFT costs ~64 kB per frame and
layer, so the dataset paths never materialise whole-piece layers: each
chunk of frames is taken from magnitudes to 88-band salience and discarded.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .cfp import LogFreqBank, salience_from_magnitudes
from .evaluation import (
    DEFAULT_THRESHOLD_RATIO,
    EvalCounts,
    PianoRoll,
    evaluate,
    ingest_ground_truth,
    pick_pitches,
)
from .mlc import MlcConfig
from .signal import TimeSeries, WindowSpec, frame_signal, make_window, stft_magnitudes_of_frames

__all__ = [
    "DEFAULT_CHUNK",
    "Analysis",
    "Piece",
    "magnitude_chunks",
    "estimate_salience",
    "estimate",
    "load_piece",
    "load_dataset",
    "dataset_counts",
]

log = logging.getLogger(__name__)

DEFAULT_CHUNK = 256


@dataclass(frozen=True)
class Analysis:
    """Rate-specific constants derived from an :class:`MlcConfig`."""

    config: MlcConfig
    sample_rate: float
    k_c: int
    n_c: int
    window: np.ndarray
    band_matrix: np.ndarray

    @classmethod
    def build(cls, config: MlcConfig, sample_rate: float, bank: LogFreqBank | None = None):
        k_c, n_c = config.cutoff_indices(sample_rate)
        bank = bank or LogFreqBank()
        return cls(config, sample_rate, k_c, n_c, make_window(config.window),
                   bank.matrix(config.window.dft_size, sample_rate))

    @property
    def frame_hop_seconds(self) -> float:
        return self.config.window.hop / self.sample_rate

    @property
    def time_offset(self) -> float:
        """Frame times are window centres."""
        return 0.5 * self.config.window.window_length / self.sample_rate

    def num_frames(self, num_samples: int) -> int:
        w = self.config.window
        return max(0, (num_samples - w.window_length) // w.hop + 1)

    def magnitudes(self, frames: np.ndarray) -> np.ndarray:
        return stft_magnitudes_of_frames(frames, self.window, self.config.window.dft_size)

    def salience(self, magnitudes: np.ndarray, gammas: Sequence[float] | None = None) -> np.ndarray:
        g = self.config.gammas if gammas is None else gammas
        return salience_from_magnitudes(magnitudes, g, self.k_c, self.n_c, self.band_matrix)


@dataclass(frozen=True)
class Piece:
    name: str
    signal: TimeSeries
    truth: PianoRoll


def magnitude_chunks(x: TimeSeries, analysis: Analysis,
                     chunk: int = DEFAULT_CHUNK) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(first_frame, N x m magnitudes)`` over the frames of ``x``."""
    w = analysis.config.window
    frames = frame_signal(x.samples, w.window_length, w.hop)
    for start in range(0, frames.shape[0], chunk):
        yield start, analysis.magnitudes(frames[start:start + chunk])


def estimate_salience(x: TimeSeries, config: MlcConfig, chunk: int = DEFAULT_CHUNK,
                      bank: LogFreqBank | None = None) -> np.ndarray:
    """88 x M salience of ``x``; requires at least one layer beyond layer 0."""
    if config.num_layers < 1:
        raise ValueError("salience needs at least two layers (L >= 1)")
    analysis = Analysis.build(config, x.sample_rate, bank)
    parts = [analysis.salience(mag) for _, mag in magnitude_chunks(x, analysis, chunk)]
    out = np.concatenate(parts, axis=1)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite salience; check gammas")
    return out


def estimate(x: TimeSeries, config: MlcConfig,
             threshold_ratio: float = DEFAULT_THRESHOLD_RATIO,
             chunk: int = DEFAULT_CHUNK) -> PianoRoll:
    analysis = Analysis.build(config, x.sample_rate)
    sal = estimate_salience(x, config, chunk)
    return pick_pitches(sal, threshold_ratio, analysis.frame_hop_seconds, analysis.time_offset)


def load_piece(audio_path, annotation_path, config: MlcConfig,
               midi_values: bool = False) -> Piece:
    from .io import read_wav

    x = read_wav(audio_path)
    analysis = Analysis.build(config, x.sample_rate)
    m = analysis.num_frames(len(x))
    if m < 1:
        raise ValueError(f"{audio_path}: shorter than one analysis window")
    truth = ingest_ground_truth(annotation_path, analysis.frame_hop_seconds, m,
                                analysis.time_offset, midi_values)
    return Piece(Path(audio_path).stem, x, truth)


def load_dataset(directory, config: MlcConfig, midi_values: bool = False) -> list[Piece]:
    """Pair ``X.wav`` with ``X.txt`` in ``directory``, sorted by stem.

    Unpaired files are reported and skipped.
    """
    d = Path(directory)
    wavs = {p.stem: p for p in d.glob("*.wav")}
    txts = {p.stem: p for p in d.glob("*.txt")}
    for stem in sorted(wavs.keys() ^ txts.keys()):
        log.warning("%s: no matching %s file", stem, "annotation" if stem in wavs else "audio")
    pieces = [load_piece(wavs[s], txts[s], config, midi_values)
              for s in sorted(wavs.keys() & txts.keys())]
    if not pieces:
        raise FileNotFoundError(f"no audio/annotation pairs in {d}")
    return pieces


def dataset_counts(pieces: Sequence[Piece], config: MlcConfig,
                   threshold_ratio: float = DEFAULT_THRESHOLD_RATIO,
                   chunk: int = DEFAULT_CHUNK) -> EvalCounts:
    """Counts summed over pieces for one configuration."""
    total = EvalCounts()
    for p in pieces:
        pred = estimate(p.signal, config, threshold_ratio, chunk)
        total = total + evaluate(pred, p.truth)
    return total
