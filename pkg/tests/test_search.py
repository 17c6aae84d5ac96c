import numpy as np
import pytest

from mlcfp.evaluation import EvalCounts, PianoRoll, scores
from mlcfp.mlc import MlcConfig
from mlcfp.pipeline import Analysis, Piece, dataset_counts, estimate
from mlcfp.quartet import synth_quartet
from mlcfp.evaluation import rows_to_roll
from mlcfp.search import (
    GREEDY_GRID,
    FrameBatch,
    SearchSpace,
    SgdConfig,
    bce_loss,
    brute_force,
    fit_affine,
    gamma_gradient,
    greedy,
    grid_counts,
    kfold_split,
    sgd_train,
)
from mlcfp.signal import TimeSeries, WindowSpec

FS = 8000.0


def _template(gammas=(1.0, 1.0)):
    return MlcConfig(WindowSpec.from_seconds(FS, 1024, 0.05), gammas, 27.5, 0.24e-3)


def _piece(seed, duration=2.0, template=None):
    template = template or _template()
    q = synth_quartet(duration, FS, seed=seed, note_range=(0.3, 0.6))
    a = Analysis.build(template, FS)
    m = a.num_frames(len(q.signal))
    truth = rows_to_roll(q.times, q.annotation_rows(), a.frame_hop_seconds, m, a.time_offset)
    return Piece(f"p{seed}", q.signal, truth)


@pytest.fixture(scope="module")
def pieces():
    return [_piece(s) for s in range(3)]


def test_single_point_grid_reproduces_pipeline(pieces):
    space = SearchSpace(((0.3,), (1.0,)))
    out = brute_force(space, pieces, _template())
    assert out.gammas == (0.3, 1.0)
    assert out.best.counts == dataset_counts(pieces, _template((0.3, 1.0)))


def test_brute_force_matches_exhaustive_reevaluation(pieces):
    space = SearchSpace(((0.2, 0.5, 0.9), (0.6, 1.0)))
    out = brute_force(space, pieces, _template(), chunk=7)
    assert len(out.table) == 6
    for row in out.table:
        assert row.counts == dataset_counts(pieces, _template(row.gammas))
    best_f = max(scores(dataset_counts(pieces, _template(g))).f_score for g in space.points())
    assert out.best.scores.f_score == best_f
    assert out.best.counts == dataset_counts(pieces, _template(out.gammas))


def test_brute_force_forced_middle_point():
    base = _piece(7, duration=1.0)
    grid = (0.2, 0.5, 0.9)
    middle = estimate(base.signal, _template((0.5, 1.0)))
    one = Piece("forced", base.signal, PianoRoll(middle.active, base.truth.frame_hop_seconds))
    others = [estimate(base.signal, _template((g, 1.0))).active for g in (0.2, 0.9)]
    assert all(not np.array_equal(o, middle.active) for o in others)
    out = brute_force(SearchSpace((grid, (1.0,))), [one], _template())
    assert out.gammas == (0.5, 1.0)
    assert out.best.scores.f_score == 1.0


def test_brute_force_tie_break_lexicographic():
    silent = _piece(1, duration=1.0)
    flat = Piece("silent", silent.signal.__class__(np.zeros_like(silent.signal.samples), FS),
                 PianoRoll.empty(silent.truth.num_frames, silent.truth.frame_hop_seconds))
    out = brute_force(SearchSpace(((0.7, 0.3), (1.0, 0.5))), [flat], _template())
    assert out.gammas == (0.3, 0.5)


def test_workers_do_not_change_results(pieces):
    space = SearchSpace(((0.3, 0.6), (0.5, 1.0), (1.0,)))
    a, _ = grid_counts(pieces, space, _template((1, 1, 1)), workers=1, chunk=5)
    b, _ = grid_counts(pieces, space, _template((1, 1, 1)), workers=3, chunk=5)
    assert a == b


def test_failed_grid_points_are_skipped(pieces):
    space = SearchSpace(((0.3, 80.0), (80.0,), (1.0,)))
    out = brute_force(space, pieces[:1], _template((1, 1, 1)))
    assert out.failures
    assert out.gammas == (0.3, 80.0, 1.0)


def test_greedy_single_layer_equals_brute(pieces):
    grid = (0.1, 0.33, 0.6, 0.9)
    g = greedy(SearchSpace.greedy(1, grid), pieces, _template())
    b = brute_force(SearchSpace((grid, (1.0,))), pieces, _template())
    assert g.gammas == b.gammas and g.best.counts == b.best.counts
    assert g.trace[0][2] == 4


def test_greedy_default_grid_size():
    assert len(GREEDY_GRID) == 99 and GREEDY_GRID[0] == 0.01 and GREEDY_GRID[-1] == 0.99
    assert SearchSpace.greedy(1).grids == (GREEDY_GRID, (1.0,))


def test_greedy_trace_is_max_over_scan(pieces):
    grid = (0.2, 0.5, 0.8)
    out = greedy(SearchSpace.greedy(2, grid), pieces, _template((1, 1, 1)))
    assert [t[0] for t in out.trace] == [1, 2]
    g0 = out.trace[0][1].gammas[0]
    rescan = [scores(dataset_counts(pieces, _template((g0, g, 1.0)))).f_score for g in grid]
    assert out.trace[1][1].scores.f_score == max(rescan)
    # a sub-grid can never beat the full scan for the same prefix
    sub = greedy(SearchSpace(((g0,), grid[:1], (1.0,))), pieces, _template((1, 1, 1)))
    assert out.trace[1][1].scores.f_score >= sub.trace[1][1].scores.f_score
    assert out.gammas[-1] == 1.0


def test_kfold_split():
    folds = kfold_split(list("abcdefghij"), 10)
    assert [t for _, t in folds] == [[c] for c in "abcdefghij"]
    for train, test in folds:
        assert not set(train) & set(test)
        assert sorted(train + test) == list("abcdefghij")
    folds = kfold_split(range(13), 5)
    assert sorted(i for _, t in folds for i in t) == list(range(13))
    with pytest.raises(ValueError):
        kfold_split(range(9), 10)


@pytest.fixture(scope="module")
def batch(pieces):
    a = Analysis.build(_template((0.24, 0.6, 1.0)), FS)
    idx = np.array([(0, f) for f in range(0, pieces[0].truth.num_frames, 3)])
    return FrameBatch.gather(pieces, idx, a)


def tone_batch(gammas, frames=4):
    """A steady harmonic tone: smooth loss in the gammas around the test point."""
    a = Analysis.build(_template(gammas), FS)
    t = np.arange(int(FS * 0.5)) / FS
    x = sum(np.sin(2 * np.pi * 220 * h * t) / h for h in range(1, 8))
    x = x + 0.01 * np.random.default_rng(0).standard_normal(x.size)
    truth = np.zeros((88, a.num_frames(x.size)), bool)
    truth[57 - 21] = True
    p = Piece("tone", TimeSeries(x, FS), PianoRoll(truth, a.frame_hop_seconds))
    return FrameBatch.gather([p], np.array([(0, f) for f in range(frames)]), a)


@pytest.mark.parametrize("gammas", [(0.24, 0.6), (0.3, 1.0)])
def test_gamma_gradient_matches_five_point_stencil(gammas):
    b = tone_batch(gammas)
    scale, bias = np.full(88, 8.0), np.full(88, -4.0)
    g3 = gamma_gradient(b, gammas, scale, bias, stencil=3)
    g5 = gamma_gradient(b, gammas, scale, bias, stencil=5)
    assert np.all(np.abs(g3 - g5) <= 1e-4 * np.abs(g5))


def test_affine_gradient_is_analytic(batch):
    feats = batch.features((0.24, 0.6, 1.0))
    r = np.random.default_rng(0)
    scale, bias = r.normal(5, 1, 88), r.normal(-3, 1, 88)
    from mlcfp.search import _affine_grad
    ga, gc = _affine_grad(feats, batch.targets, scale, bias)
    for b in (0, 40, 60):
        h = 1e-6
        e = np.zeros(88)
        e[b] = h
        num_a = (bce_loss(feats, batch.targets, scale + e, bias)
                 - bce_loss(feats, batch.targets, scale - e, bias)) / (2 * h)
        num_c = (bce_loss(feats, batch.targets, scale, bias + e)
                 - bce_loss(feats, batch.targets, scale, bias - e)) / (2 * h)
        assert ga[b] == pytest.approx(num_a, rel=1e-5, abs=1e-10)
        assert gc[b] == pytest.approx(num_c, rel=1e-5, abs=1e-10)


def test_convex_toy_loss_monotone():
    r = np.random.default_rng(5)
    x = r.random((1, 400))
    y = (x + 0.3 * r.standard_normal(x.shape) > 0.5).astype(float)
    _, _, hist = fit_affine(x, y, np.zeros(1), np.zeros(1), 1e-3, 200)
    assert np.all(np.diff(hist) <= 0)
    assert hist[-1] < hist[0]


def test_sgd_zero_learning_rate_keeps_parameters(pieces):
    cfg = SgdConfig(learning_rate=0.0, batch_size=16, max_epochs=2)
    out = sgd_train(cfg, pieces, _template((0.24, 0.6, 1.0)), k=3)
    assert len(out.folds) == 3
    for f in out.folds:
        assert f.gammas == (0.24, 0.6, 1.0)
        assert np.all(f.scale == 8.0) and np.all(f.bias == -4.0)


def test_sgd_runs_and_is_deterministic(pieces):
    cfg = SgdConfig(learning_rate=0.1, batch_size=32, max_epochs=1, seed=3)
    a = sgd_train(cfg, pieces, _template((0.24, 0.6, 1.0)), k=3)
    b = sgd_train(cfg, pieces, _template((0.24, 0.6, 1.0)), k=3)
    assert a.counts == b.counts
    assert [f.gammas for f in a.folds] == [f.gammas for f in b.folds]
    total = sum((f.counts for f in a.folds), EvalCounts())
    assert total == a.counts
    assert a.counts.tp + a.counts.fn == sum(int(p.truth.active.sum()) for p in pieces)
    lo, hi = cfg.gamma_bounds
    assert all(lo <= g <= hi for f in a.folds for g in f.gammas)
