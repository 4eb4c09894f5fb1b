import numpy as np
import pytest

from emblend.errors import (DimMismatch, InsufficientSamples, MissingPartner)
from emblend.retrieval import (GapReport, RetrievalIndex, clustering_diagnostic,
                               gap_reduction, modality_gap, recall_at_k, top_k)

rng = np.random.default_rng(31)


def unit_rows(n, d, gen=None):
    gen = gen or rng
    x = gen.normal(size=(n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def sort_oracle(ids, matrix, query, k):
    """Independent full-sort ranking with the same tie rule."""
    sims = matrix @ query
    order = sorted(range(len(ids)), key=lambda i: (-sims[i], ids[i]))
    return [(ids[i], float(sims[i])) for i in order[:k]]


class TestTopK:
    def test_two_candidates(self):
        index = RetrievalIndex(["a", "b"], np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert top_k(index, [1.0, 0.0], 1) == [("a", 1.0)]

    def test_k_zero(self):
        index = RetrievalIndex(["a"], np.array([[1.0, 0.0]]))
        assert top_k(index, [1.0, 0.0], 0) == []

    def test_k_larger_than_index(self):
        index = RetrievalIndex(["a", "b"], unit_rows(2, 4))
        assert len(top_k(index, unit_rows(1, 4)[0], 99)) == 2

    def test_tie_breaks_by_ascending_id(self):
        vec = np.array([1.0, 0.0])
        index = RetrievalIndex(["z", "a"], np.array([vec, vec]))
        result = top_k(index, vec, 2)
        assert [sid for sid, _ in result] == ["a", "z"]

    def test_dim_mismatch(self):
        index = RetrievalIndex(["a"], np.array([[1.0, 0.0]]))
        with pytest.raises(DimMismatch):
            top_k(index, [1.0, 0.0, 0.0], 1)

    def test_matches_full_sort_oracle(self):
        for trial in range(50):
            gen = np.random.default_rng(trial)
            n = int(gen.integers(2, 60))
            d = int(gen.integers(2, 10))
            ids = [f"s{gen.integers(10**6):06d}-{i}" for i in range(n)]
            mat = unit_rows(n, d, gen)
            query = unit_rows(1, d, gen)[0]
            k = int(gen.integers(1, n + 1))
            assert top_k(RetrievalIndex(ids, mat), query, k) == \
                sort_oracle(ids, mat, query, k)


class TestRecall:
    def test_direct_counts(self):
        # construct queries with known partner ranks 1, 2, 5
        d = 8
        anchors = np.eye(d)[:5]
        index = RetrievalIndex([f"s{i}" for i in range(5)], anchors)
        q1 = anchors[0]
        q2 = 0.9 * anchors[0] + 0.436 * anchors[1]
        q2 /= np.linalg.norm(q2)
        q5 = anchors[0] * 0.1 + (anchors[1] + anchors[2] + anchors[3] + anchors[4])
        q5 /= np.linalg.norm(q5)
        queries = np.vstack([q1, q2, q5])
        partners = ["s0", "s1", "s0"]
        r = recall_at_k(queries, partners, index, [1, 3, 5])
        assert r[1] == pytest.approx(1 / 3)
        assert r[3] == pytest.approx(2 / 3)
        assert r[5] == pytest.approx(1.0)

    def test_perfect_retrieval(self):
        mat = unit_rows(10, 6)
        index = RetrievalIndex([f"s{i}" for i in range(10)], mat)
        r = recall_at_k(mat, [f"s{i}" for i in range(10)], index, [1, 5, 10])
        assert all(v == 1.0 for v in r.values())

    def test_monotone_in_k(self):
        for trial in range(10):
            gen = np.random.default_rng(100 + trial)
            n = int(gen.integers(3, 40))
            mat = unit_rows(n, 5, gen)
            queries = unit_rows(n, 5, gen)
            ids = [f"s{i}" for i in range(n)]
            r = recall_at_k(queries, ids, RetrievalIndex(ids, mat), range(1, n + 1))
            values = [r[k] for k in range(1, n + 1)]
            assert all(a <= b for a, b in zip(values, values[1:]))
            assert values[-1] == 1.0

    def test_missing_partner(self):
        index = RetrievalIndex(["a"], np.array([[1.0, 0.0]]))
        with pytest.raises(MissingPartner):
            recall_at_k(np.array([[1.0, 0.0]]), ["zz"], index, [1])


class TestModalityGap:
    def test_collapsed_space_zero_gaps(self):
        x = unit_rows(12, 4)
        mods = ["image", "audio", "text"] * 4
        report = modality_gap(x, x, mods)
        assert all(g == pytest.approx(0.0) for g in report.gaps.values())
        assert report.average == pytest.approx(0.0)

    def test_centroid_distance(self):
        raw = np.tile([1.0, 0.0], (4, 1))
        anchors = np.tile([0.0, 0.0], (4, 1))
        report = modality_gap(raw, anchors, ["image"] * 4)
        assert report.gaps["image"] == pytest.approx(1.0)

    def test_reduction_percentage_table_arithmetic(self):
        base = GapReport(gaps={"video": 44.29}, average=44.29)
        projected = GapReport(gaps={"video": 0.081}, average=0.081)
        delta = gap_reduction(projected, base)
        assert delta["video"] == pytest.approx(-99.8, abs=0.05)

    def test_rotation_invariance(self):
        gen = np.random.default_rng(9)
        raw = unit_rows(30, 6, gen)
        anchors = unit_rows(30, 6, gen)
        mods = (["image"] * 10) + (["audio"] * 10) + (["video"] * 10)
        q, _ = np.linalg.qr(gen.normal(size=(6, 6)))
        r1 = modality_gap(raw, anchors, mods)
        r2 = modality_gap(raw @ q, anchors @ q, mods)
        for m in r1.gaps:
            assert r1.gaps[m] == pytest.approx(r2.gaps[m], abs=1e-9)


class TestClusteringDiagnostic:
    def test_tight_separated_clusters_flag_true(self):
        gen = np.random.default_rng(4)
        a = np.tile([10.0, 0.0], (20, 1)) + 0.1 * gen.normal(size=(20, 2))
        b = np.tile([-10.0, 0.0], (20, 1)) + 0.1 * gen.normal(size=(20, 2))
        diag = clustering_diagnostic(np.vstack([a, b]), ["image"] * 20 + ["text"] * 20)
        assert diag["clustered"] is True

    def test_identical_points_not_clustered(self):
        pts = np.tile([1.0, 0.0], (8, 1))
        diag = clustering_diagnostic(pts, ["image"] * 4 + ["text"] * 4)
        assert diag["clustered"] is False

    def test_shuffled_tags_on_mixed_cloud_not_clustered(self):
        gen = np.random.default_rng(12)
        cloud = unit_rows(60, 8, gen)
        tags = ["image"] * 30 + ["text"] * 30
        diag = clustering_diagnostic(cloud, tags)
        assert diag["clustered"] is False

    def test_insufficient_samples(self):
        with pytest.raises(InsufficientSamples):
            clustering_diagnostic(unit_rows(3, 4), ["image", "image", "text"])
        with pytest.raises(InsufficientSamples):
            clustering_diagnostic(unit_rows(4, 4), ["image"] * 4)
