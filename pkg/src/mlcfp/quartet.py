"""Seeded synthetic four-voice polyphony with an exact ground-truth annotation.

Used where no annotated recordings are at hand: each voice is a sequence of
harmonic tones with a 1/h amplitude rolloff, random partial phases and a
short attack/release ramp, written alongside a ``time f0 f0 ...`` file on a
10 ms grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evaluation import midi_to_hz
from .signal import TimeSeries

__all__ = ["VOICE_RANGES", "Quartet", "synth_quartet"]

# MIDI ranges roughly following violin, clarinet, saxophone and bassoon parts
VOICE_RANGES = ((67, 79), (60, 72), (53, 65), (45, 57))


@dataclass(frozen=True)
class Quartet:
    signal: TimeSeries
    times: np.ndarray
    f0s: np.ndarray  # frames x voices, Hz, 0 = silent

    def annotation_rows(self) -> list[list[float]]:
        return [[f for f in row if f > 0] for row in self.f0s]

    def annotation_text(self) -> str:
        lines = []
        for t, row in zip(self.times, self.f0s):
            vals = " ".join(f"{f:.4f}" for f in row if f > 0)
            lines.append(f"{t:.3f} {vals}".rstrip())
        return "\n".join(lines) + "\n"


def synth_quartet(duration: float = 30.0, fs: float = 44100.0, seed: int = 0,
                  note_range: tuple[float, float] = (0.4, 1.2),
                  annotation_hop: float = 0.01,
                  num_harmonics: int = 12) -> Quartet:
    rng = np.random.default_rng(seed)
    n_total = int(round(duration * fs))
    x = np.zeros(n_total)
    n_ann = int(np.floor(duration / annotation_hop))
    times = np.arange(n_ann) * annotation_hop
    f0s = np.zeros((n_ann, len(VOICE_RANGES)))
    ramp = int(0.01 * fs)
    for v, (lo, hi) in enumerate(VOICE_RANGES):
        t = 0.0
        while t < duration:
            dur = min(rng.uniform(*note_range), duration - t)
            midi = int(rng.integers(lo, hi + 1))
            f0 = midi_to_hz(midi)
            a, b = int(round(t * fs)), int(round((t + dur) * fs))
            n = np.arange(b - a) / fs
            tone = np.zeros(b - a)
            for h in range(1, num_harmonics + 1):
                if h * f0 >= 0.45 * fs:
                    break
                tone += np.sin(2 * np.pi * h * f0 * n + rng.uniform(0, 2 * np.pi)) / h
            env = np.ones(b - a)
            r = min(ramp, (b - a) // 2)
            if r > 0:
                env[:r] = np.linspace(0, 1, r)
                env[-r:] = np.linspace(1, 0, r)
            x[a:b] += 0.25 * rng.uniform(0.6, 1.0) * env * tone
            sel = (times >= t) & (times < t + dur)
            f0s[sel, v] = f0
            t += dur
    return Quartet(TimeSeries(x, fs), times, f0s)
