import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlcfp.cfp import (
    CfpRepresentation,
    LogFreqBank,
    fuse,
    fuse_arrays,
    fusion_pair,
    project_to_bands,
    quefrency_index,
    quefrency_lookup,
)
from mlcfp.signal import Spectrogram


def test_quefrency_index_examples():
    assert quefrency_index(250, 1000) == 4
    # 2.5 rounds away from zero; banker's rounding would give 2
    assert quefrency_index(400, 1000) == 3
    assert round(1000 / 400) == 2
    assert quefrency_index(3, 1000) == 333
    with pytest.raises(ValueError):
        quefrency_index(0, 1000)
    with pytest.raises(ValueError):
        quefrency_index(1, 1000)


@given(st.integers(4, 5000))
def test_quefrency_index_non_increasing_and_vectorised(n):
    k, q = quefrency_lookup(n)
    valid = q >= 0
    assert np.all(np.diff(q[valid]) <= 0)
    for kk, qq in zip(k[valid][:50], q[valid][:50]):
        assert quefrency_index(int(kk), n) == qq
    assert not valid[0]  # k = 1 always maps to N


def _sym(r, n, m):
    half = np.abs(r.standard_normal((n // 2 + 1, m)))
    tail = half[1:(n + 1) // 2][::-1]
    return np.concatenate([half, tail])


def _spec(v, axis):
    return Spectrogram(v, axis, 1000.0, 0.01)


def test_fuse_annihilation_and_identity(rng):
    n = 50
    zf = _sym(rng, n, 3)
    zq = np.abs(rng.standard_normal((n, 3)))
    y = fuse(_spec(np.zeros((n, 3)), "frequency"), _spec(zq, "quefrency"))
    assert not y.values.any()
    y = fuse(_spec(zf, "frequency"), _spec(np.ones((n, 3)), "quefrency"))
    want = zf.copy()
    want[[0, 1, n - 1]] = 0.0  # k = 0 and k = 1 (and its mirror) have no valid pairing
    np.testing.assert_allclose(y.values, want)


def test_fuse_literal_product(rng):
    n = 37
    zf, zq = np.abs(rng.standard_normal((n, 2))), np.abs(rng.standard_normal((n, 2)))
    y = fuse_arrays(zf, zq)
    for k in range(2, n // 2 + 1):
        q = int(np.floor(n / k + 0.5))
        np.testing.assert_allclose(y[k], zf[k] * zq[q])
        np.testing.assert_allclose(y[n - k], y[k])


def test_fuse_errors(rng):
    a = np.ones((8, 2))
    with pytest.raises(ValueError):
        fuse(_spec(a, "quefrency"), _spec(a, "quefrency"))
    with pytest.raises(ValueError):
        fuse(_spec(a, "frequency"), _spec(np.ones((8, 3)), "quefrency"))


def test_fuse_monotone_in_frequency_layer(rng):
    n = 40
    zf, zq = np.abs(rng.standard_normal((n, 1))), np.abs(rng.standard_normal((n, 1)))
    base = fuse_arrays(zf, zq)
    for k in range(n):
        bumped = zf.copy()
        bumped[k] += 1.0
        assert np.all(fuse_arrays(bumped, zq) >= base)


def test_fusion_pair():
    assert fusion_pair(1) == (0, 1)
    assert fusion_pair(2) == (2, 1)
    assert fusion_pair(6) == (6, 5)
    with pytest.raises(ValueError):
        fusion_pair(0)
    with pytest.raises(ValueError):
        CfpRepresentation(np.zeros((4, 1)), (1, 2), 1.0, 1.0)


def test_bank_geometry():
    bank = LogFreqBank()
    c, e = bank.centers, bank.edges
    assert c.size == 88 and e.size == 89
    assert np.isclose(c[0], 27.5) and np.isclose(c[48], 440.0)
    assert np.all(np.diff(c) > 0)
    assert np.all((e[:-1] < c) & (c < e[1:]))
    np.testing.assert_allclose(e[1:-1], np.sqrt(c[:-1] * c[1:]))


def _cfp(values, fs=8000.0):
    return CfpRepresentation(values, (2, 1), fs, 0.01)


def test_projection_examples():
    n, fs = 8000, 8000.0
    assert not project_to_bands(_cfp(np.zeros((n, 2)), fs)).any()
    y = np.zeros((n, 1))
    y[440] = 3.0  # 1 Hz bins
    sal = project_to_bands(_cfp(y, fs))
    assert sal[69 - 21, 0] == 3.0
    assert np.count_nonzero(sal) == 1


def test_projection_partition_accounting(rng):
    n, fs = 4096, 44100.0
    y = np.abs(rng.standard_normal((n, 3)))
    sal = project_to_bands(_cfp(y, fs))
    bank = LogFreqBank()
    freqs = np.arange(n // 2 + 1) * fs / n
    covered = (freqs >= bank.edges[0]) & (freqs < bank.edges[-1])
    covered[0] = False
    np.testing.assert_allclose(sal.sum(axis=0), y[: n // 2 + 1][covered].sum(axis=0))
    assert np.all(sal.sum(axis=0) <= y[1: n // 2 + 1].sum(axis=0) + 1e-9)


def test_projection_linear_and_permutation_stable(rng):
    n = 2048
    a, b = np.abs(rng.standard_normal((n, 5))), np.abs(rng.standard_normal((n, 5)))
    pa, pb = project_to_bands(_cfp(a)), project_to_bands(_cfp(b))
    np.testing.assert_allclose(project_to_bands(_cfp(2 * a + 3 * b)), 2 * pa + 3 * pb)
    perm = rng.permutation(5)
    np.testing.assert_allclose(project_to_bands(_cfp(a[:, perm])), pa[:, perm])
