"""The numba and numpy kernel paths must agree on random inputs."""
import numpy as np
import pytest

from emblend import kernels


rng = np.random.default_rng(42)


def test_backend_reported():
    assert kernels.active_backend() in ("numba", "numpy")


@pytest.mark.parametrize("n,d,groups", [(30, 4, 2), (120, 8, 4), (57, 16, 3)])
def test_group_distance_stats_paths_agree(n, d, groups):
    x = rng.normal(size=(n, d))
    labels = rng.integers(0, groups, size=n)
    ref = kernels._np_group_distance_stats(x, labels, groups)
    if kernels._NUMBA_IMPORTABLE:
        got = kernels._nb_group_distance_stats(
            np.ascontiguousarray(x), np.ascontiguousarray(labels), groups)
    else:
        got = ref
    for a, b in zip(ref, got):
        assert np.allclose(a, b, rtol=1e-9, atol=1e-9)


def test_group_distance_stats_brute_force():
    x = rng.normal(size=(25, 3))
    labels = rng.integers(0, 3, size=25)
    intra_sum, intra_cnt, inter_sum, inter_cnt = kernels.group_distance_stats(x, labels, 3)
    exp_intra = np.zeros(3)
    exp_icnt = np.zeros(3)
    exp_inter = np.zeros((3, 3))
    exp_xcnt = np.zeros((3, 3))
    for i in range(25):
        for j in range(i + 1, 25):
            dist = np.linalg.norm(x[i] - x[j])
            gi, gj = labels[i], labels[j]
            if gi == gj:
                exp_intra[gi] += dist
                exp_icnt[gi] += 1
            else:
                a, b = min(gi, gj), max(gi, gj)
                exp_inter[a, b] += dist
                exp_xcnt[a, b] += 1
    assert np.allclose(intra_sum, exp_intra)
    assert np.array_equal(intra_cnt, exp_icnt.astype(np.int64))
    assert np.allclose(inter_sum, exp_inter)
    assert np.array_equal(inter_cnt, exp_xcnt.astype(np.int64))


@pytest.mark.parametrize("n,d,k", [(50, 4, 3), (200, 8, 10)])
def test_kmeans_assign_paths_agree(n, d, k):
    x = rng.normal(size=(n, d))
    centroids = rng.normal(size=(k, d))
    ref = kernels._np_kmeans_assign(x, centroids)
    if kernels._NUMBA_IMPORTABLE:
        got = kernels._nb_kmeans_assign(
            np.ascontiguousarray(x), np.ascontiguousarray(centroids))
        assert np.array_equal(ref, got)
    brute = np.array([
        int(np.argmin([np.sum((x[i] - c) ** 2) for c in centroids])) for i in range(n)
    ])
    assert np.array_equal(ref, brute)


def test_kmeans_assign_tie_breaks_to_first():
    x = np.array([[0.0, 0.0]])
    centroids = np.array([[1.0, 0.0], [-1.0, 0.0]])
    assert kernels.kmeans_assign(x, centroids)[0] == 0


@pytest.mark.parametrize("n,d", [(40, 6), (150, 12)])
def test_dedup_scan_paths_agree(n, d):
    x = rng.normal(size=(n, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    x[7] = x[3]   # exact duplicate
    x[20] = x[5] + 1e-6
    x[20] /= np.linalg.norm(x[20])
    for eps in (0.0, 0.05, 0.5):
        ref = kernels._np_dedup_scan(x, eps)
        if kernels._NUMBA_IMPORTABLE:
            got = kernels._nb_dedup_scan(np.ascontiguousarray(x), eps)
            assert np.array_equal(ref, got)
        assert not (ref[3] and ref[7])  # both copies of a duplicate never survive


def test_dedup_scan_greedy_semantics():
    # three mutually close rows: only the first survives
    base = np.zeros((3, 4))
    base[:, 0] = 1.0
    base[1, 1] = 0.05
    base[2, 1] = -0.05
    base /= np.linalg.norm(base, axis=1, keepdims=True)
    keep = kernels.dedup_scan(base, 0.05)
    assert keep.tolist() == [True, False, False]
