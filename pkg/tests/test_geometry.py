import numpy as np
import pytest

from emblend.errors import DimMismatch, EmptySet, ZeroVector
from emblend.geometry import (Embedding, centroid, cosine_sim, make_embedding,
                              normalize, spread)


class TestNormalize:
    def test_pythagorean(self):
        assert np.allclose(normalize([3.0, 4.0]), [0.6, 0.8])

    def test_axis(self):
        assert np.allclose(normalize([0.0, 2.0]), [0.0, 1.0])

    def test_zero_vector_rejected(self):
        with pytest.raises(ZeroVector):
            normalize([0.0, 0.0])

    def test_idempotent_after_one_rounding(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            v = rng.normal(size=rng.integers(2, 20))
            once = normalize(v)
            twice = normalize(once)
            assert np.allclose(twice, once, rtol=0, atol=1e-15)
            assert abs(float(np.linalg.norm(twice)) - 1.0) < 1e-14


class TestCosineSim:
    def test_identity(self):
        assert cosine_sim([1.0, 0.0], [1.0, 0.0]) == 1.0

    def test_orthogonal(self):
        assert cosine_sim([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_diagonal(self):
        assert cosine_sim(normalize([1.0, 1.0]), [1.0, 0.0]) == pytest.approx(
            0.70710678, abs=1e-8)

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            u = normalize(rng.normal(size=8))
            v = normalize(rng.normal(size=8))
            assert cosine_sim(u, v) == cosine_sim(v, u)

    def test_clamped(self):
        v = normalize(np.full(64, 1.0))
        assert -1.0 <= cosine_sim(v, v) <= 1.0

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            cosine_sim([1.0, 0.0], [1.0, 0.0, 0.0])


class TestCentroid:
    def test_symmetry(self):
        assert np.allclose(centroid([[1.0, 0.0], [-1.0, 0.0]]), [0.0, 0.0])

    def test_singleton(self):
        assert np.allclose(centroid([[1.0, 0.0]]), [1.0, 0.0])

    def test_mean_of_two(self):
        assert np.allclose(centroid([[1.0, 0.0], [0.0, 1.0]]), [0.5, 0.5])

    def test_empty(self):
        with pytest.raises(EmptySet):
            centroid(np.zeros((0, 3)))

    def test_permutation_invariant(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(10, 4))
        shuffled = pts[rng.permutation(10)]
        assert np.allclose(centroid(pts), centroid(shuffled))

    def test_not_renormalized(self):
        c = centroid([[1.0, 0.0], [0.0, 1.0]])
        assert np.linalg.norm(c) < 1.0


class TestSpread:
    def test_degenerate_cluster(self):
        pts = np.tile([0.3, 0.4], (5, 1))
        assert spread(pts, [0.3, 0.4]) == 0.0

    def test_two_points(self):
        assert spread([[1.0, 0.0], [-1.0, 0.0]], [0.0, 0.0]) == pytest.approx(1.0)

    def test_single_distance(self):
        assert spread([[2.0, 0.0]], [0.0, 0.0]) == pytest.approx(2.0)

    def test_empty(self):
        with pytest.raises(EmptySet):
            spread(np.zeros((0, 2)), [0.0, 0.0])

    def test_zero_iff_identical(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(6, 3))
        c = centroid(pts)
        assert spread(pts, c) > 0.0


class TestEmbedding:
    def test_construction_normalizes(self):
        emb = make_embedding([3.0, 4.0], "e", "text", "s1")
        assert emb.dim == 2
        assert abs(np.linalg.norm(emb.values) - 1.0) <= 1e-6

    def test_non_unit_rejected(self):
        with pytest.raises(ZeroVector):
            Embedding(np.array([3.0, 4.0]), "e", "text", "s1")
