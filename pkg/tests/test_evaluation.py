import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mlcfp.evaluation import (
    EvalCounts,
    PianoRoll,
    evaluate,
    hz_to_midi,
    ingest_ground_truth,
    midi_to_hz,
    pick_pitches,
    read_annotation,
    scores,
    write_predictions,
)

# (P, R, F) in percent for every Table 1 cell triple
TABLE1 = [
    (77.72, 83.51, 80.51), (80.55, 87.20, 83.74), (79.33, 89.93, 84.30),
    (81.06, 90.80, 85.66), (81.14, 90.67, 85.64), (82.35, 91.10, 86.50),
    (78.05, 83.57, 80.71), (81.05, 85.23, 83.09), (80.28, 86.66, 83.35),
    (80.16, 87.08, 83.47), (80.20, 87.27, 83.58), (80.29, 87.57, 83.77),
    (77.67, 78.43, 78.05), (79.35, 88.10, 83.50), (82.61, 85.99, 84.26),
    (81.02, 85.83, 83.36), (81.80, 86.22, 83.95), (81.97, 82.18, 82.07),
]


def counts_for(p_pct, r_pct):
    """Integer counts whose precision and recall are exactly the given percentages."""
    p, r = round(p_pct * 100), round(r_pct * 100)
    tp = p * r
    return EvalCounts(tp, 10000 * r - tp, 10000 * p - tp)


@pytest.mark.parametrize("p,r,f", TABLE1)
def test_table1_f_identity(p, r, f):
    s = scores(counts_for(p, r))
    assert abs(100 * s.precision - p) < 1e-9 and abs(100 * s.recall - r) < 1e-9
    assert abs(100 * s.f_score - f) <= 0.01


def test_scores_degenerate_and_symmetric():
    assert scores(EvalCounts()) == scores(EvalCounts(0, 0, 0))
    s = scores(EvalCounts(0, 0, 0))
    assert (s.precision, s.recall, s.f_score) == (0.0, 0.0, 0.0)
    s = scores(EvalCounts(30, 10, 10))
    assert s.precision == s.recall == s.f_score == 0.75


def test_hz_to_midi():
    assert hz_to_midi(440.0) == 69.0
    assert hz_to_midi(27.5) == pytest.approx(21.0, abs=1e-12)
    assert hz_to_midi(880.0) == pytest.approx(81.0, abs=1e-12)
    assert midi_to_hz(hz_to_midi(123.4)) == pytest.approx(123.4)
    with pytest.raises(ValueError):
        hz_to_midi(0.0)


def _frame(values):
    s = np.zeros((88, 1))
    for b, v in values.items():
        s[b, 0] = v
    return s


def test_pick_pitches_examples():
    assert not pick_pitches(np.zeros((88, 3))).active.any()
    for ratio in (0.01, 0.5, 0.99):
        roll = pick_pitches(_frame({40: 2.0}), ratio)
        assert np.flatnonzero(roll.active[:, 0]).tolist() == [40]
    roll = pick_pitches(_frame({10: 1.0, 50: 1.0}), 0.5)
    assert np.flatnonzero(roll.active[:, 0]).tolist() == [10, 50]
    # edge bands compare one-sided; a below-threshold peak is dropped
    roll = pick_pitches(_frame({0: 1.0, 87: 0.5, 40: 0.05}), 0.1)
    assert np.flatnonzero(roll.active[:, 0]).tolist() == [0, 87]
    # plateau: neither of two equal neighbours is strictly greater
    assert not pick_pitches(_frame({20: 1.0, 21: 1.0}), 0.5).active.any()
    with pytest.raises(ValueError):
        pick_pitches(np.zeros((88, 1)), 1.0)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (88, 4), elements=st.floats(0, 1e3)), st.floats(1e-3, 1e3))
def test_pick_pitches_scale_invariant(sal, alpha):
    a = pick_pitches(sal, 0.25).active
    b = pick_pitches(alpha * sal, 0.25).active
    # exact ties at the threshold can flip under rounding; exclude them
    top = sal.max(axis=0, keepdims=True)
    near = np.isclose(sal, 0.25 * top, rtol=1e-9)
    assert np.array_equal(a & ~near, b & ~near)


def _roll(rng, m=20, density=0.1):
    return PianoRoll(rng.random((88, m)) < density, 0.01)


def test_evaluate_examples(rng):
    truth = _roll(rng)
    c = truth.active.sum()
    assert evaluate(truth, truth) == EvalCounts(c, 0, 0)
    assert evaluate(PianoRoll.empty(20, 0.01), truth) == EvalCounts(0, 0, c)
    t = np.zeros((88, 20), bool)
    t[10::5, ::2] = True
    shifted = np.roll(t, 1, axis=0)
    assert evaluate(PianoRoll(shifted, 0.01), PianoRoll(t, 0.01)) == \
        EvalCounts(0, t.sum(), t.sum())
    with pytest.raises(ValueError):
        evaluate(PianoRoll.empty(19, 0.01), truth)


def test_evaluate_invariants(rng):
    pred, truth = _roll(rng), _roll(rng)
    c = evaluate(pred, truth)
    assert c.tp + c.fn == truth.active.sum()
    perm = rng.permutation(20)
    assert evaluate(PianoRoll(pred.active[:, perm], 0.01),
                    PianoRoll(truth.active[:, perm], 0.01)) == c
    doubled = evaluate(PianoRoll(np.hstack([pred.active] * 3), 0.01),
                       PianoRoll(np.hstack([truth.active] * 3), 0.01))
    assert doubled == c + c + c
    assert scores(doubled) == scores(c)


def test_ingest_single_line(tmp_path):
    f = tmp_path / "a.txt"
    f.write_text("0.00 440.0\n")
    roll = ingest_ground_truth(f, 0.01, 1)
    assert np.flatnonzero(roll.active[:, 0]).tolist() == [69 - 21]


def test_ingest_silence_and_drops(tmp_path, caplog):
    f = tmp_path / "a.txt"
    f.write_text("0.00 0\n0.01 440 20000\n0.02 0 261.63\n")
    roll = ingest_ground_truth(f, 0.01, 3)
    assert not roll.active[:, 0].any()
    assert np.flatnonzero(roll.active[:, 1]).tolist() == [48]
    assert np.flatnonzero(roll.active[:, 2]).tolist() == [60 - 21]
    assert "dropped 1" in caplog.text


def test_ingest_nearest_frame_resampling(tmp_path):
    f = tmp_path / "a.txt"
    f.write_text("0.00 440\n0.02 880\n")
    roll = ingest_ground_truth(f, 0.01, 4)
    rows = [np.flatnonzero(roll.active[:, j]).tolist() for j in range(4)]
    assert rows == [[48], [48], [60], [60]]
    # frames past the annotated span are silent
    roll = ingest_ground_truth(f, 0.01, 8)
    assert not roll.active[:, 4:].any()


def test_ingest_midi_values(tmp_path):
    f = tmp_path / "a.txt"
    f.write_text("0.0 60 64 67\n")
    roll = ingest_ground_truth(f, 0.01, 1, midi_values=True)
    assert (np.flatnonzero(roll.active[:, 0]) + 21).tolist() == [60, 64, 67]


@pytest.mark.parametrize("text", ["", "# only a comment\n", "0.0 abc\n", "0.1 440\n0.0 440\n"])
def test_ingest_errors(tmp_path, text):
    f = tmp_path / "a.txt"
    f.write_text(text)
    with pytest.raises(ValueError):
        read_annotation(f)


def test_prediction_round_trip(tmp_path, rng):
    roll = _roll(rng)
    path = tmp_path / "pred.txt"
    write_predictions(roll, path)
    back = ingest_ground_truth(path, 0.01, 20)
    np.testing.assert_array_equal(back.active, roll.active)
