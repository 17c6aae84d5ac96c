"""Frame-level multi-pitch decisions, annotation I/O and P/R/F scoring."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cfp import MIDI_HIGH, MIDI_LOW, NUM_PITCHES

__all__ = [
    "PianoRoll",
    "EvalCounts",
    "Scores",
    "DEFAULT_THRESHOLD_RATIO",
    "pick_pitches",
    "hz_to_midi",
    "midi_to_hz",
    "read_annotation",
    "rows_to_roll",
    "ingest_ground_truth",
    "write_predictions",
    "evaluate",
    "scores",
]

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD_RATIO = 0.1


@dataclass(frozen=True)
class PianoRoll:
    """88 x M boolean activity grid, row 0 = MIDI 21 (A0)."""

    active: np.ndarray
    frame_hop_seconds: float
    time_offset: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.active, dtype=bool)
        if a.ndim != 2 or a.shape[0] != NUM_PITCHES:
            raise ValueError(f"piano roll must be {NUM_PITCHES} x M, got {a.shape}")
        if not self.frame_hop_seconds > 0:
            raise ValueError("frame hop must be positive")
        object.__setattr__(self, "active", a)

    @property
    def num_frames(self) -> int:
        return self.active.shape[1]

    def frame_times(self) -> np.ndarray:
        return self.time_offset + np.arange(self.num_frames) * self.frame_hop_seconds

    @classmethod
    def empty(cls, num_frames: int, frame_hop_seconds: float, time_offset: float = 0.0):
        return cls(np.zeros((NUM_PITCHES, num_frames), bool), frame_hop_seconds, time_offset)


@dataclass(frozen=True)
class EvalCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "EvalCounts") -> "EvalCounts":
        return EvalCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f_score: float

    def __str__(self):
        return (f"P={100 * self.precision:.2f}%  R={100 * self.recall:.2f}%  "
                f"F={100 * self.f_score:.2f}%")


def pick_pitches(salience: np.ndarray, threshold_ratio: float = DEFAULT_THRESHOLD_RATIO,
                 frame_hop_seconds: float = 0.01, time_offset: float = 0.0) -> PianoRoll:
    """Relative-threshold peak picking across the 88 bands of each frame.

    A band is active when it is strictly above both neighbours (edge bands
    compare against their single neighbour) and reaches ``threshold_ratio``
    of the frame maximum.
    """
    if not 0 < threshold_ratio < 1:
        raise ValueError(f"threshold_ratio must be in (0, 1), got {threshold_ratio}")
    s = np.asarray(salience, dtype=float)
    if s.shape[0] != NUM_PITCHES:
        raise ValueError(f"salience must have {NUM_PITCHES} rows, got {s.shape[0]}")
    left = np.full_like(s, -np.inf)
    right = np.full_like(s, -np.inf)
    left[1:] = s[:-1]
    right[:-1] = s[1:]
    peak = (s > left) & (s > right)
    top = s.max(axis=0, keepdims=True)
    active = peak & (s >= threshold_ratio * top) & (top > 0)
    return PianoRoll(active, frame_hop_seconds, time_offset)


def hz_to_midi(f):
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be positive")
    out = 69.0 + 12.0 * np.log2(f / 440.0)
    return float(out) if out.ndim == 0 else out


def midi_to_hz(m):
    out = 440.0 * 2.0 ** ((np.asarray(m, dtype=float) - 69.0) / 12.0)
    return float(out) if out.ndim == 0 else out


def read_annotation(path) -> tuple[np.ndarray, list[list[float]]]:
    """Parse ``time f0 f0 ...`` lines; returns times and per-line value lists.

    Blank lines and ``#`` comments are skipped.
    """
    times, rows = [], []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            fields = [float(t) for t in line.replace(",", " ").split()]
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed annotation line {line!r}") from None
        if not all(np.isfinite(fields)) or any(v < 0 for v in fields[1:]):
            raise ValueError(f"{path}:{lineno}: values must be finite and nonnegative")
        times.append(fields[0])
        rows.append(fields[1:])
    if not times:
        raise ValueError(f"{path}: empty annotation file")
    t = np.asarray(times)
    if np.any(np.diff(t) <= 0):
        raise ValueError(f"{path}: annotation times must be strictly increasing")
    return t, rows


def rows_to_roll(times: np.ndarray, rows: list[list[float]], frame_hop_seconds: float,
                 num_frames: int, time_offset: float = 0.0,
                 midi_values: bool = False) -> PianoRoll:
    """Resample annotation rows onto the analysis frame grid by nearest-frame lookup.

    Exact ties go to the earlier annotation frame.  Analysis frames more than
    half an annotation hop past the last annotation are silent.
    """
    if not frame_hop_seconds > 0:
        raise ValueError("frame hop must be positive")
    ann = np.zeros((NUM_PITCHES, len(times)), bool)
    dropped = 0
    for j, vals in enumerate(rows):
        for v in vals:
            if v == 0:
                continue
            m = int(round(v if midi_values else hz_to_midi(v)))
            if MIDI_LOW <= m <= MIDI_HIGH:
                ann[m - MIDI_LOW, j] = True
            else:
                dropped += 1
    if dropped:
        log.warning("dropped %d annotated pitches outside MIDI %d..%d",
                    dropped, MIDI_LOW, MIDI_HIGH)
    frame_t = time_offset + np.arange(num_frames) * frame_hop_seconds
    tol = 1e-9 * max(1.0, frame_hop_seconds)
    mids = 0.5 * (times[:-1] + times[1:])
    idx = np.searchsorted(mids, frame_t - tol, side="left")
    ann_hop = float(np.median(np.diff(times))) if len(times) > 1 else frame_hop_seconds
    inside = (frame_t >= times[0] - 0.5 * ann_hop - tol) & \
             (frame_t <= times[-1] + 0.5 * ann_hop + tol)
    active = ann[:, idx] & inside[None, :]
    return PianoRoll(active, frame_hop_seconds, time_offset)


def ingest_ground_truth(path, frame_hop_seconds: float, num_frames: int,
                        time_offset: float = 0.0, midi_values: bool = False) -> PianoRoll:
    times, rows = read_annotation(path)
    return rows_to_roll(times, rows, frame_hop_seconds, num_frames, time_offset, midi_values)


def write_predictions(roll: PianoRoll, path) -> None:
    """Write ``time f0 f0 ...`` lines, F0s at band centres in Hz."""
    centers = midi_to_hz(np.arange(MIDI_LOW, MIDI_HIGH + 1))
    lines = []
    for t, col in zip(roll.frame_times(), roll.active.T):
        f = " ".join(f"{c:.4f}" for c in centers[col])
        lines.append(f"{t:.6f} {f}".rstrip())
    Path(path).write_text("\n".join(lines) + "\n")


def evaluate(pred: PianoRoll, truth: PianoRoll) -> EvalCounts:
    if pred.active.shape != truth.active.shape:
        raise ValueError(f"roll shapes differ: {pred.active.shape} vs {truth.active.shape}")
    p, t = pred.active, truth.active
    return EvalCounts(int(np.sum(p & t)), int(np.sum(p & ~t)), int(np.sum(~p & t)))


def scores(counts: EvalCounts) -> Scores:
    """Precision, recall and F-measure; every 0/0 is taken as 0."""
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return Scores(p, r, f)
