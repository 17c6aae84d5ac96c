"""Choosing the per-layer exponents: exhaustive grid, greedy, and SGD.

Grid and greedy searches score every candidate on F-measure of counts summed
over the whole dataset.  Counts are additive over frames, so the search
walks the data once, chunk by chunk, and inside each chunk enumerates the
grid depth-first: a layer computed for a gamma prefix is reused by every
grid point sharing that prefix.
"""
from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .cfp import NUM_PITCHES, fuse_arrays, fusion_pair
from .evaluation import (
    DEFAULT_THRESHOLD_RATIO,
    EvalCounts,
    PianoRoll,
    Scores,
    evaluate,
    pick_pitches,
    scores,
)
from .mlc import MlcConfig
from .pipeline import DEFAULT_CHUNK, Analysis, Piece
from .signal import frame_signal, highpass_mask, power_activation, real_dft

__all__ = [
    "BRUTE_GRID",
    "GREEDY_GRID",
    "SearchSpace",
    "GridResult",
    "SearchOutcome",
    "grid_counts",
    "brute_force",
    "greedy",
    "kfold_split",
    "SgdConfig",
    "FoldResult",
    "SgdOutcome",
    "FrameBatch",
    "bce_loss",
    "gamma_gradient",
    "fit_affine",
    "sgd_train",
]

log = logging.getLogger(__name__)

BRUTE_GRID = tuple(round(0.1 * i, 1) for i in range(1, 11))  # 0.1 .. 0.9 plus 1.0
GREEDY_GRID = tuple(round(0.01 * i, 2) for i in range(1, 100))  # 0.01 .. 0.99


@dataclass(frozen=True)
class SearchSpace:
    """One candidate list per layer ``0..L``."""

    grids: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        g = tuple(tuple(float(v) for v in grid) for grid in self.grids)
        if len(g) < 2:
            raise ValueError("search needs at least two layers (L >= 1)")
        if any(len(grid) == 0 for grid in g):
            raise ValueError("every layer grid must be non-empty")
        if any(v <= 0 for grid in g for v in grid):
            raise ValueError("grid values must be positive")
        object.__setattr__(self, "grids", g)

    @property
    def num_layers(self) -> int:
        return len(self.grids) - 1

    @property
    def fusion_pair(self) -> tuple[int, int]:
        return fusion_pair(self.num_layers)

    def points(self):
        return itertools.product(*self.grids)

    @property
    def size(self) -> int:
        return int(np.prod([len(g) for g in self.grids]))

    @classmethod
    def brute(cls, num_layers: int, grid: Sequence[float] = BRUTE_GRID) -> "SearchSpace":
        return cls(tuple(tuple(grid) for _ in range(num_layers + 1)))

    @classmethod
    def greedy(cls, num_layers: int, grid: Sequence[float] = GREEDY_GRID,
               terminal: float = 1.0) -> "SearchSpace":
        """Scan grid on layers ``0..L-1``; the last layer is held at ``terminal``."""
        return cls(tuple(tuple(grid) for _ in range(num_layers)) + ((terminal,),))


@dataclass(frozen=True)
class GridResult:
    gammas: tuple[float, ...]
    counts: EvalCounts
    scores: Scores


@dataclass
class SearchOutcome:
    method: str
    best: GridResult | None
    table: list[GridResult] = field(default_factory=list)
    trace: list[tuple[int, GridResult, int]] = field(default_factory=list)
    failures: dict[tuple[float, ...], str] = field(default_factory=dict)

    @property
    def gammas(self) -> tuple[float, ...]:
        return self.best.gammas


def _chunk_grid_counts(magnitudes: np.ndarray, truth: np.ndarray, space: SearchSpace,
                       analysis: Analysis, threshold_ratio: float,
                       failures: dict) -> dict[tuple[float, ...], EvalCounts]:
    n = magnitudes.shape[0]
    masks = {0: highpass_mask(n, analysis.k_c), 1: highpass_mask(n, analysis.n_c)}
    l_e, l_o = space.fusion_pair
    L = space.num_layers
    out: dict[tuple[float, ...], EvalCounts] = {}
    truth_roll = PianoRoll(truth, 1.0)

    def walk(level: int, prefix: tuple[float, ...], layers: list[np.ndarray],
             dft: np.ndarray | None):
        for g in space.grids[level]:
            key = prefix + (g,)
            if any(key[:i + 1] in failures for i in range(len(key))):
                continue
            try:
                if level == 0:
                    z = power_activation(magnitudes, g)
                else:
                    z = power_activation(dft, g)
                if not np.all(np.isfinite(z)):
                    raise FloatingPointError(f"non-finite layer {level}")
                if level == L:
                    y = fuse_arrays((layers + [z])[l_e], (layers + [z])[l_o])
                    sal = analysis.band_matrix @ y
                    pred = pick_pitches(sal, threshold_ratio)
                    out[key] = evaluate(pred, truth_roll)
                else:
                    nxt = real_dft(z, axis=0) * masks[(level + 1) % 2][:, None]
                    walk(level + 1, key, layers + [z], nxt)
            except (ValueError, FloatingPointError) as exc:
                log.warning("grid point %s failed: %s", key, exc)
                failures[key] = str(exc)

    with np.errstate(over="ignore", invalid="ignore"):
        walk(0, (), [], None)
    return out


def grid_counts(pieces: Sequence[Piece], space: SearchSpace, template: MlcConfig,
                threshold_ratio: float = DEFAULT_THRESHOLD_RATIO,
                chunk: int = DEFAULT_CHUNK, workers: int = 1):
    """Summed counts for every grid point; returns ``(counts, failures)``.

    Work is split by (piece, chunk); the reduction runs in task order so the
    result does not depend on ``workers``.
    """
    if not pieces:
        raise ValueError("dataset is empty")
    tasks = []
    for p in pieces:
        analysis = Analysis.build(template, p.signal.sample_rate)
        w = template.window
        frames = frame_signal(p.signal.samples, w.window_length, w.hop)
        if frames.shape[0] != p.truth.num_frames:
            raise ValueError(f"{p.name}: truth has {p.truth.num_frames} frames, "
                             f"analysis has {frames.shape[0]}")
        for start in range(0, frames.shape[0], chunk):
            tasks.append((analysis, frames[start:start + chunk],
                          p.truth.active[:, start:start + chunk]))
    failures: dict = {}

    def run(task):
        analysis, fr, tr = task
        return _chunk_grid_counts(analysis.magnitudes(fr), tr, space, analysis,
                                  threshold_ratio, failures)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    totals: dict[tuple[float, ...], EvalCounts] = {}
    for res in results:
        for key, c in res.items():
            totals[key] = totals.get(key, EvalCounts()) + c
    for key in list(totals):
        if key in failures:
            del totals[key]
    return totals, failures


def _best(totals: dict[tuple[float, ...], EvalCounts]) -> GridResult | None:
    best = None
    for key in sorted(totals):
        s = scores(totals[key])
        if best is None or s.f_score > best.scores.f_score:
            best = GridResult(key, totals[key], s)
    return best


def brute_force(space: SearchSpace, pieces: Sequence[Piece], template: MlcConfig,
                threshold_ratio: float = DEFAULT_THRESHOLD_RATIO,
                chunk: int = DEFAULT_CHUNK, workers: int = 1) -> SearchOutcome:
    """Exhaustive search; ties go to the lexicographically smallest gamma vector."""
    totals, failures = grid_counts(pieces, space, template, threshold_ratio, chunk, workers)
    table = [GridResult(k, totals[k], scores(totals[k])) for k in sorted(totals)]
    return SearchOutcome("brute", _best(totals), table, failures=failures)


def greedy(space: SearchSpace, pieces: Sequence[Piece], template: MlcConfig,
           threshold_ratio: float = DEFAULT_THRESHOLD_RATIO,
           chunk: int = DEFAULT_CHUNK, workers: int = 1) -> SearchOutcome:
    """Layer-wise search without revisiting earlier choices.

    Step ``l`` (1..L) scans ``gamma_{l-1}`` over its grid with the chosen
    prefix fixed and the newest layer held at the first value of its own
    grid (``grids[l][0]``), scoring the pair (l-1, l).  The final layer keeps
    ``grids[L][0]``.
    """
    chosen: list[float] = []
    outcome = SearchOutcome("greedy", None)
    for l in range(1, space.num_layers + 1):
        sub = SearchSpace(tuple((g,) for g in chosen) + (space.grids[l - 1],)
                          + ((space.grids[l][0],),))
        totals, failures = grid_counts(pieces, sub, template, threshold_ratio, chunk, workers)
        outcome.failures.update(failures)
        best = _best(totals)
        if best is None:
            raise RuntimeError(f"greedy step {l}: every candidate failed")
        outcome.trace.append((l, best, len(sub.grids[l - 1])))
        outcome.table.extend(GridResult(k, totals[k], scores(totals[k])) for k in sorted(totals))
        chosen.append(best.gammas[l - 1])
    outcome.best = outcome.trace[-1][1]
    return outcome


def kfold_split(piece_ids: Sequence, k: int = 10) -> list[tuple[list, list]]:
    """Contiguous, order-preserving folds; fold sizes differ by at most one."""
    ids = list(piece_ids)
    if k < 2:
        raise ValueError("need at least 2 folds")
    if len(ids) < k:
        raise ValueError(f"{len(ids)} pieces cannot fill {k} folds")
    bounds = np.linspace(0, len(ids), k + 1).round().astype(int)
    folds = []
    for i in range(k):
        test = ids[bounds[i]:bounds[i + 1]]
        train = ids[:bounds[i]] + ids[bounds[i + 1]:]
        folds.append((train, test))
    return folds


# --- SGD -------------------------------------------------------------------


@dataclass(frozen=True)
class SgdConfig:
    """Mini-batch SGD on mean binary cross-entropy.

    The sigmoid output layer sees frame-normalised salience (each frame
    divided by its largest band) through a per-band affine map initialised
    to ``init_scale`` / ``init_bias``.
    """

    learning_rate: float = 0.1
    batch_size: int = 256
    max_epochs: int = 40
    init_gammas: tuple[float, ...] | None = None
    init_scale: float = 8.0
    init_bias: float = -4.0
    fd_step: float = 1e-3
    gamma_bounds: tuple[float, float] = (0.01, 3.0)
    train_gammas: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning rate must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")

    def gammas_for(self, num_layers: int) -> tuple[float, ...]:
        if self.init_gammas is not None:
            if len(self.init_gammas) != num_layers + 1:
                raise ValueError("init_gammas length must be num_layers + 1")
            return tuple(self.init_gammas)
        return tuple([0.24, 0.6] + [1.0] * (num_layers - 1))[:num_layers + 1]


class FrameBatch:
    """Magnitudes and targets for a set of frames, ready for repeated forward passes."""

    def __init__(self, magnitudes: np.ndarray, targets: np.ndarray, analysis: Analysis):
        self.magnitudes = magnitudes
        self.targets = targets.astype(float)
        self.analysis = analysis

    @classmethod
    def gather(cls, pieces: Sequence[Piece], index: np.ndarray, analysis: Analysis):
        """``index`` rows are (piece, frame) pairs."""
        w = analysis.config.window
        mags, tgts = [], []
        for pi in np.unique(index[:, 0]):
            sel = index[index[:, 0] == pi, 1]
            p = pieces[pi]
            frames = frame_signal(p.signal.samples, w.window_length, w.hop)[sel]
            mags.append(analysis.magnitudes(frames))
            tgts.append(p.truth.active[:, sel])
        return cls(np.concatenate(mags, axis=1), np.concatenate(tgts, axis=1), analysis)

    def features(self, gammas: Sequence[float]) -> np.ndarray:
        sal = self.analysis.salience(self.magnitudes, gammas)
        if not np.all(np.isfinite(sal)):
            raise FloatingPointError(f"non-finite salience at gammas {tuple(gammas)}")
        top = sal.max(axis=0, keepdims=True)
        return np.divide(sal, top, out=np.zeros_like(sal), where=top > 0)


def bce_loss(features: np.ndarray, targets: np.ndarray, scale: np.ndarray,
             bias: np.ndarray) -> float:
    """Mean binary cross-entropy of ``sigmoid(scale * features + bias)``."""
    z = scale[:, None] * features + bias[:, None]
    # log(1 + e^z) - t z, stable for either sign of z
    return float(np.mean(np.logaddexp(0.0, z) - targets * z))


def _affine_grad(features, targets, scale, bias):
    z = scale[:, None] * features + bias[:, None]
    d = (expit(z) - targets) / z.size
    return (d * features).sum(axis=1), d.sum(axis=1)


def gamma_gradient(batch: FrameBatch, gammas: Sequence[float], scale: np.ndarray,
                   bias: np.ndarray, rel_step: float = 1e-3, stencil: int = 3) -> np.ndarray:
    """Finite-difference loss gradient in the gammas (3- or 5-point central)."""
    g = np.asarray(gammas, dtype=float)
    grad = np.zeros_like(g)

    def loss_at(v):
        return bce_loss(batch.features(v), batch.targets, scale, bias)

    for i in range(g.size):
        h = rel_step * g[i]
        e = np.zeros_like(g)
        e[i] = h
        if stencil == 3:
            grad[i] = (loss_at(g + e) - loss_at(g - e)) / (2 * h)
        elif stencil == 5:
            grad[i] = (-loss_at(g + 2 * e) + 8 * loss_at(g + e) - 8 * loss_at(g - e)
                       + loss_at(g - 2 * e)) / (12 * h)
        else:
            raise ValueError("stencil must be 3 or 5")
    return grad


def fit_affine(features: np.ndarray, targets: np.ndarray, scale: np.ndarray,
               bias: np.ndarray, learning_rate: float, epochs: int,
               batch_size: int | None = None, seed: int = 0) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Train only the output layer on fixed features; returns per-epoch full-set losses."""
    scale, bias = scale.copy(), bias.copy()
    rng = np.random.default_rng(seed)
    m = features.shape[1]
    bs = batch_size or m
    history = [bce_loss(features, targets, scale, bias)]
    for _ in range(epochs):
        order = rng.permutation(m) if bs < m else np.arange(m)
        for s in range(0, m, bs):
            sel = order[s:s + bs]
            ga, gc = _affine_grad(features[:, sel], targets[:, sel], scale, bias)
            scale -= learning_rate * ga
            bias -= learning_rate * gc
        history.append(bce_loss(features, targets, scale, bias))
    return scale, bias, history


@dataclass(frozen=True)
class FoldResult:
    test: tuple[str, ...]
    gammas: tuple[float, ...]
    scale: np.ndarray
    bias: np.ndarray
    counts: EvalCounts
    losses: tuple[float, ...]


@dataclass(frozen=True)
class SgdOutcome:
    folds: tuple[FoldResult, ...]
    counts: EvalCounts

    @property
    def scores(self) -> Scores:
        return scores(self.counts)


def _train_fold(train: Sequence[Piece], analysis: Analysis, cfg: SgdConfig,
                num_layers: int, rng: np.random.Generator):
    gammas = np.array(cfg.gammas_for(num_layers), dtype=float)
    scale = np.full(NUM_PITCHES, cfg.init_scale)
    bias = np.full(NUM_PITCHES, cfg.init_bias)
    index = np.array([(i, f) for i, p in enumerate(train) for f in range(p.truth.num_frames)])
    losses = []
    lo, hi = cfg.gamma_bounds
    for _ in range(cfg.max_epochs):
        order = rng.permutation(len(index))
        epoch_loss, seen = 0.0, 0
        for s in range(0, len(order), cfg.batch_size):
            batch = FrameBatch.gather(train, index[order[s:s + cfg.batch_size]], analysis)
            feats = batch.features(gammas)
            loss = bce_loss(feats, batch.targets, scale, bias)
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at gammas {tuple(gammas)}")
            ga, gc = _affine_grad(feats, batch.targets, scale, bias)
            if cfg.train_gammas and cfg.learning_rate > 0:
                gg = gamma_gradient(batch, gammas, scale, bias, cfg.fd_step)
                gammas = np.clip(gammas - cfg.learning_rate * gg, lo, hi)
            scale = scale - cfg.learning_rate * ga
            bias = bias - cfg.learning_rate * gc
            epoch_loss += loss * feats.shape[1]
            seen += feats.shape[1]
        losses.append(epoch_loss / max(seen, 1))
        log.info("epoch %d: loss %.5f gammas %s", len(losses), losses[-1],
                 np.round(gammas, 4).tolist())
    return tuple(float(g) for g in gammas), scale, bias, tuple(losses)


def sgd_train(cfg: SgdConfig, pieces: Sequence[Piece], template: MlcConfig,
              k: int = 10) -> SgdOutcome:
    """k-fold training; test predictions are ``sigmoid > 0.5`` pooled into one count."""
    if template.num_layers < 1:
        raise ValueError("SGD needs at least two layers (L >= 1)")
    folds = kfold_split(range(len(pieces)), k)
    rng = np.random.default_rng(cfg.seed)
    results, total = [], EvalCounts()
    for train_idx, test_idx in folds:
        train = [pieces[i] for i in train_idx]
        analysis = Analysis.build(template, train[0].signal.sample_rate)
        try:
            gammas, scale, bias, losses = _train_fold(train, analysis, cfg,
                                                      template.num_layers, rng)
        except FloatingPointError as exc:
            raise FloatingPointError(
                f"fold with test pieces {[pieces[i].name for i in test_idx]}: {exc}") from exc
        counts = EvalCounts()
        for i in test_idx:
            p = pieces[i]
            a = Analysis.build(template, p.signal.sample_rate)
            idx = np.array([(0, f) for f in range(p.truth.num_frames)])
            for s in range(0, len(idx), DEFAULT_CHUNK):
                batch = FrameBatch.gather([p], idx[s:s + DEFAULT_CHUNK], a)
                z = scale[:, None] * batch.features(gammas) + bias[:, None]
                pred = PianoRoll(expit(z) > 0.5, 1.0)
                counts = counts + evaluate(pred, PianoRoll(batch.targets > 0.5, 1.0))
        total = total + counts
        results.append(FoldResult(tuple(pieces[i].name for i in test_idx), gammas, scale,
                                  bias, counts, losses))
    return SgdOutcome(tuple(results), total)
