import numpy as np
import pytest

from emblend.curation import (Blend, FilterConfig, blend_stats, curate_topn,
                              heuristic_filter, kmeans, pca_2d,
                              sample_stratified, sample_uniform, semantic_dedup,
                              stratified_quotas, traditional_pipeline)
from emblend.errors import (EmptyPool, KTooLarge, NTooLarge, PoolTooSmall,
                            UnknownId)
from emblend.sns import Component, PairedSample

rng = np.random.default_rng(17)


def make_samples(n, pools=1, modality="text"):
    out = []
    for i in range(n):
        out.append(PairedSample(
            sample_id=f"s{i:04d}", pool_id=f"pool{i % pools}",
            raw_modality=modality,
            raw_components=[Component(f"raw {i}.")],
            annotation_components=[Component(f"annotation {i}.")]))
    return out


def unit_rows(n, d, gen=None):
    gen = gen or rng
    x = gen.normal(size=(n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


class TestCurateTopN:
    def test_hand_set_similarities(self):
        samples = make_samples(3)
        query = np.array([1.0, 0.0])
        fused = np.array([[0.9, np.sqrt(1 - 0.81)],
                          [0.5, np.sqrt(0.75)],
                          [0.1, np.sqrt(0.99)]])
        blend = curate_topn(query, samples, fused, 2)
        assert blend.sample_ids == ["s0000", "s0001"]
        assert blend.scores[0] == pytest.approx(0.9)

    def test_full_pool(self):
        samples = make_samples(4)
        fused = unit_rows(4, 3)
        blend = curate_topn(unit_rows(1, 3)[0], samples, fused, 4)
        assert sorted(blend.sample_ids) == [s.sample_id for s in samples]

    def test_query_match_ranks_first(self):
        samples = make_samples(5)
        fused = unit_rows(5, 4)
        blend = curate_topn(fused[3], samples, fused, 1)
        assert blend.sample_ids == ["s0003"]

    def test_permutation_invariant(self):
        samples = make_samples(20)
        fused = unit_rows(20, 4)
        query = unit_rows(1, 4)[0]
        blend = curate_topn(query, samples, fused, 5)
        perm = rng.permutation(20)
        blend2 = curate_topn(query, [samples[i] for i in perm], fused[perm], 5)
        assert blend.sample_ids == blend2.sample_ids

    def test_empty_pool(self):
        with pytest.raises(EmptyPool):
            curate_topn(np.ones(2), [], np.zeros((0, 2)), 1)


class TestSampleUniform:
    def test_deterministic(self):
        samples = make_samples(30)
        a = sample_uniform(samples, 10, seed=5)
        b = sample_uniform(samples, 10, seed=5)
        assert a.sample_ids == b.sample_ids

    def test_whole_pool(self):
        samples = make_samples(7)
        blend = sample_uniform(samples, 7, seed=1)
        assert sorted(blend.sample_ids) == [s.sample_id for s in samples]

    def test_no_duplicates(self):
        samples = make_samples(50)
        blend = sample_uniform(samples, 25, seed=2)
        assert len(set(blend.sample_ids)) == 25

    def test_n_too_large(self):
        with pytest.raises(NTooLarge):
            sample_uniform(make_samples(3), 4, seed=0)

    def test_inclusion_frequency_monte_carlo(self):
        samples = make_samples(10)
        counts = {s.sample_id: 0 for s in samples}
        for seed in range(1000):
            for sid in sample_uniform(samples, 5, seed=seed).sample_ids:
                counts[sid] += 1
        for sid, c in counts.items():
            assert abs(c / 1000 - 0.5) <= 0.05, (sid, c)


class TestSampleStratified:
    def test_five_pools_thousand_each(self):
        samples = make_samples(10000, pools=5)
        blend = sample_stratified(samples, 5000, seed=3)
        assert all(v == 1000 for v in blend.per_pool.values())
        assert len(blend.per_pool) == 5

    def test_even_split(self):
        samples = make_samples(8, pools=2)
        blend = sample_stratified(samples, 4, seed=4)
        assert all(v == 2 for v in blend.per_pool.values())

    def test_remainder_to_largest_pools(self):
        # pools sized 5, 2, 2: n=4 -> quotas {2,1,1} with extra to the largest
        assert stratified_quotas({"a": 5, "b": 2, "c": 2}, 4) == \
            {"a": 2, "b": 1, "c": 1}

    def test_remainder_tie_broken_by_pool_id(self):
        assert stratified_quotas({"b": 3, "a": 3, "c": 3}, 4) == \
            {"a": 2, "b": 1, "c": 1}

    def test_pool_too_small(self):
        # pools sized {3, 1}; quotas for n=4 are 2+2, the small pool cannot fill
        samples = make_samples(4, pools=1)
        samples[-1] = PairedSample(
            sample_id="tiny", pool_id="poolX", raw_modality="text",
            raw_components=[Component("r.")],
            annotation_components=[Component("a.")])
        with pytest.raises(PoolTooSmall):
            sample_stratified(samples, 4, seed=0)

    def test_deterministic(self):
        samples = make_samples(40, pools=4)
        a = sample_stratified(samples, 20, seed=9)
        b = sample_stratified(samples, 20, seed=9)
        assert a.sample_ids == b.sample_ids


class TestHeuristicFilter:
    def test_ratio_counts_non_whitespace(self):
        report = heuristic_filter("abc!!", FilterConfig())
        assert report.measured["non_alnum_ratio"] == pytest.approx(0.4)
        assert "non_alnum_ratio" not in report.failed_rules

    def test_ratio_fails_above_threshold(self):
        report = heuristic_filter("!!!@@ ab", FilterConfig())
        assert report.measured["non_alnum_ratio"] == pytest.approx(5 / 7)
        assert report.passed is False

    def test_repeated_lines_fail(self):
        text = "\n".join(["same line"] * 10)
        report = heuristic_filter(text, FilterConfig())
        assert report.measured["repeated_line_fraction"] == pytest.approx(0.9)
        assert "repeated_line_fraction" in report.failed_rules

    def test_clean_sentence_passes(self):
        report = heuristic_filter("A perfectly normal annotation sentence.",
                                  FilterConfig())
        assert report.passed is True

    def test_boilerplate_case_insensitive(self):
        cfg = FilterConfig(boilerplate=["click HERE"])
        report = heuristic_filter("Click here to subscribe.", cfg)
        assert "boilerplate" in report.failed_rules

    def test_empty_text_dedicated_rule(self):
        report = heuristic_filter("   ", FilterConfig())
        assert report.failed_rules == ["empty_text"]


class TestKMeans:
    def test_recovers_separated_clusters(self):
        gen = np.random.default_rng(6)
        a = gen.normal(size=(30, 4)) * 0.05 + np.array([5.0, 0, 0, 0])
        b = gen.normal(size=(30, 4)) * 0.05 - np.array([5.0, 0, 0, 0])
        labels, _ = kmeans(np.vstack([a, b]), 2, seed=0)
        assert len(set(labels[:30])) == 1
        assert len(set(labels[30:])) == 1
        assert labels[0] != labels[30]

    def test_k_too_large(self):
        with pytest.raises(KTooLarge):
            kmeans(unit_rows(3, 2), 4, seed=0)

    def test_deterministic(self):
        x = unit_rows(40, 5)
        l1, c1 = kmeans(x, 4, seed=5)
        l2, c2 = kmeans(x, 4, seed=5)
        assert np.array_equal(l1, l2)
        assert np.array_equal(c1, c2)


class TestSemanticDedup:
    def test_exact_duplicates_keep_one(self):
        x = unit_rows(20, 6)
        x[7] = x[3]
        ids = [f"s{i:02d}" for i in range(20)]
        kept = semantic_dedup(ids, x, k_clusters=4, epsilon=0.05, seed=1)
        assert ("s03" in kept) != ("s07" in kept) or "s07" not in kept
        assert not ("s03" in kept and "s07" in kept)

    def test_all_distant_all_kept(self):
        x = np.eye(8)
        ids = [f"s{i}" for i in range(8)]
        kept = semantic_dedup(ids, x, k_clusters=2, epsilon=0.05, seed=2)
        assert kept == sorted(ids)

    def test_tight_triple_keeps_scan_first(self):
        base = unit_rows(1, 8)[0]
        x = np.vstack([base, base, base] + [unit_rows(1, 8, np.random.default_rng(i))[0]
                                            for i in range(5)])
        ids = [f"s{i}" for i in range(8)]
        kept = semantic_dedup(ids, x, k_clusters=2, epsilon=0.05, seed=3)
        assert "s0" in kept and "s1" not in kept and "s2" not in kept

    def test_idempotent(self):
        gen = np.random.default_rng(8)
        x = unit_rows(60, 16, gen)
        x[10] = x[4]
        x[31] = x[11]
        ids = [f"s{i:02d}" for i in range(60)]
        kept = semantic_dedup(ids, x, k_clusters=5, epsilon=0.05, seed=4)
        row = {sid: i for i, sid in enumerate(ids)}
        x2 = np.vstack([x[row[sid]] for sid in kept])
        kept2 = semantic_dedup(kept, x2, k_clusters=5, epsilon=0.05, seed=4)
        assert kept2 == kept

    def test_k_too_large(self):
        with pytest.raises(KTooLarge):
            semantic_dedup(["a"], unit_rows(1, 4), 2, 0.05, 0)


class TestTraditionalPipeline:
    def annotations(self, texts, pools=1):
        out = []
        for i, t in enumerate(texts):
            out.append(PairedSample(
                sample_id=f"s{i:03d}", pool_id=f"pool{i % pools}",
                raw_modality="text",
                raw_components=[Component(f"raw {i}.")],
                annotation_components=[Component(t)]))
        return out

    def test_all_filtered_yields_empty_with_warning(self):
        samples = self.annotations(["!!!", "@@@", "###"])
        ann = unit_rows(3, 4)
        blend, reports = traditional_pipeline(samples, ann, unit_rows(1, 4)[0], 2)
        assert blend.sample_ids == []
        assert blend.warning is not None
        assert all(not r.passed for r in reports)

    def test_permissive_equals_plain_topn(self):
        samples = self.annotations([f"clean text number {i}." for i in range(12)])
        ann = unit_rows(12, 6)
        query = unit_rows(1, 6)[0]
        blend, _ = traditional_pipeline(samples, ann, query, 5, seed=7)
        sims = ann @ query
        order = sorted(range(12), key=lambda i: (-sims[i], f"s{i:03d}"))
        assert blend.sample_ids == [f"s{i:03d}" for i in order[:5]]

    def test_output_subset_of_filter_survivors(self):
        texts = [f"good annotation {i}." for i in range(10)] + ["!!!", "???"]
        samples = self.annotations(texts)
        ann = unit_rows(12, 5)
        blend, reports = traditional_pipeline(samples, ann, unit_rows(1, 5)[0], 12)
        survivors = {r.sample_id for r in reports if r.passed}
        assert set(blend.sample_ids) <= survivors
        assert blend.warning is not None  # fewer survivors than n

    def test_deterministic(self):
        samples = self.annotations([f"clean text {i}." for i in range(30)], pools=3)
        ann = unit_rows(30, 8)
        query = unit_rows(1, 8)[0]
        b1, _ = traditional_pipeline(samples, ann, query, 10, seed=5)
        b2, _ = traditional_pipeline(samples, ann, query, 10, seed=5)
        assert b1.sample_ids == b2.sample_ids


class TestBlendStats:
    def test_single_pool_fraction(self):
        samples = make_samples(6)
        by_id = {s.sample_id: s for s in samples}
        blend = Blend("uniform", [s.sample_id for s in samples[:4]], [None] * 4, 4,
                      per_pool={"pool0": 4}, per_modality={"text": 4})
        stats, coords = blend_stats(blend, by_id)
        assert stats["per_pool"]["pool0"]["fraction"] == 1.0
        assert coords is None

    def test_stratified_fractions(self):
        samples = make_samples(100, pools=5)
        blend = sample_stratified(samples, 50, seed=0)
        stats, _ = blend_stats(blend, {s.sample_id: s for s in samples})
        for p in stats["per_pool"].values():
            assert p["fraction"] == pytest.approx(0.2)

    def test_unknown_id(self):
        blend = Blend("uniform", ["ghost"], [None], 1)
        with pytest.raises(UnknownId):
            blend_stats(blend, {})

    def test_pca_recovers_planar_geometry(self):
        gen = np.random.default_rng(14)
        coords2d = gen.normal(size=(40, 2)) * np.array([3.0, 1.0])
        basis, _ = np.linalg.qr(gen.normal(size=(9, 2)))
        embedded = coords2d @ basis.T + 5.0
        got = pca_2d(embedded)
        # distances within the plane are preserved up to rotation/reflection
        ref = coords2d - coords2d.mean(axis=0)
        d_ref = np.linalg.norm(ref[:, None, :] - ref[None, :, :], axis=2)
        d_got = np.linalg.norm(got[:, None, :] - got[None, :, :], axis=2)
        assert np.allclose(d_ref, d_got, atol=1e-8)

    def test_pca_deterministic_sign(self):
        x = rng.normal(size=(20, 6))
        assert np.array_equal(pca_2d(x), pca_2d(x))
