"""WAV, CSV and flat key/value config I/O."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.io.wavfile

from .signal import Spectrogram, TimeSeries

__all__ = ["read_wav", "write_wav", "write_matrix_csv", "read_matrix_csv",
           "write_spectrogram_csv", "write_salience_csv", "write_roll_csv",
           "parse_config_text", "read_config"]


def read_wav(path) -> TimeSeries:
    """Mono float signal in [-1, 1] for integer PCM; channels are averaged."""
    fs, data = scipy.io.wavfile.read(path)
    if data.size == 0:
        raise ValueError(f"{path}: no samples")
    if np.issubdtype(data.dtype, np.integer):
        info = np.iinfo(data.dtype)
        if info.min == 0:  # unsigned 8-bit
            data = (data.astype(float) - 128.0) / 128.0
        else:
            data = data.astype(float) / -float(info.min)
    else:
        data = data.astype(float)
    if data.ndim == 2:
        data = data.mean(axis=1)
    return TimeSeries(data, float(fs))


def write_wav(path, x: TimeSeries, fmt: str = "float32") -> None:
    """``fmt`` is ``float32`` or ``pcm16``; PCM output is clipped to [-1, 1]."""
    fs = int(round(x.sample_rate))
    if fmt == "float32":
        data = x.samples.astype(np.float32)
    elif fmt == "pcm16":
        data = np.round(np.clip(x.samples, -1.0, 1.0) * 32767).astype(np.int16)
    else:
        raise ValueError(f"unknown WAV format {fmt!r}")
    scipy.io.wavfile.write(path, fs, data)


def write_matrix_csv(path, values: np.ndarray, row_keys: Iterable, col_keys: Iterable,
                     corner: str = "") -> None:
    """Rows are bins, columns are frames; first row/column carry the keys."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([corner] + [repr(float(c)) for c in col_keys])
        for key, row in zip(row_keys, values):
            w.writerow([repr(float(key))] + [repr(float(v)) for v in row])


def read_matrix_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`write_matrix_csv`: ``(values, row_keys, col_keys)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    cols = np.array([float(c) for c in rows[0][1:]])
    keys = np.array([float(r[0]) for r in rows[1:]])
    vals = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return vals, keys, cols


def write_spectrogram_csv(path, z: Spectrogram) -> None:
    corner = "hz\\s" if z.axis == "frequency" else "quefrency_s\\s"
    write_matrix_csv(path, z.values, z.bin_positions(), z.frame_times(), corner)


def write_salience_csv(path, salience: np.ndarray, frame_times: np.ndarray) -> None:
    write_matrix_csv(path, salience, range(21, 21 + salience.shape[0]), frame_times,
                     "midi\\s")


def write_roll_csv(path, active: np.ndarray, frame_times: np.ndarray) -> None:
    write_matrix_csv(path, active.astype(int), range(21, 21 + active.shape[0]),
                     frame_times, "midi\\s")


def parse_config_text(text: str) -> dict[str, str]:
    """``key = value`` lines, ``#`` comments; later keys override earlier ones."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValueError(f"config line {lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def read_config(path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text())
