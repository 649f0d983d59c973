import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from counterranker.corpus import Setting, Stance
from counterranker.features import (
    FEATURE_NAMES,
    FeatureContext,
    FeatureError,
    FeaturePipeline,
    FeatureRow,
    N_FEATURES,
    apply_standardizer,
    extract_features,
    fit_standardizer,
    invert_standardizer,
    load_feature_cache,
    save_feature_cache,
)
from counterranker.simdis import build_bm25_stats
from counterranker.textrep import EmbeddingStore, tokenize
from conftest import make_argument, random_store_for
from oracles import features_straightline


def pair_context(point, candidate, dim=8, seed=5):
    rng = np.random.default_rng(seed)
    entries = {}
    for arg in (point, candidate):
        for tok in tokenize(arg.full_text()):
            if tok not in entries:
                vec = rng.normal(size=dim)
                entries[tok] = vec / np.linalg.norm(vec)
        entries["doc:" + arg.id] = rng.normal(size=dim)
    store = EmbeddingStore(dim, entries)
    stats = build_bm25_stats(
        [tokenize(point.full_text()), tokenize(candidate.full_text())]
    )
    return FeatureContext(store, stats)


class TestExtractFeatures:
    def test_identical_texts_force_metric_one(self):
        text = "shared words everywhere"
        point = make_argument("p", conclusion=text, premise=text, counter_id=None)
        cand = make_argument(
            "c", stance=Stance.con, conclusion=text, premise=text, counter_id=None
        )
        ctx = pair_context(point, cand)
        x = extract_features(point, cand, ctx)
        # candidate text is conclusion + premise, so each side's tf differs
        # from neither text; every similarity metric hits 1, then aggregation
        for group_start in (0, 4, 8):  # manhattan, earth-mover, cosine
            assert x[group_start + 0] == pytest.approx(1.0, abs=1e-12)  # min
            assert x[group_start + 1] == pytest.approx(1.0, abs=1e-12)  # max
            assert x[group_start + 2] == pytest.approx(1.0, abs=1e-12)  # product
            assert x[group_start + 3] == pytest.approx(2.0, abs=1e-12)  # sum

    def test_matches_straightline_reimplementation(self, small_synthetic):
        corpus = small_synthetic
        store = random_store_for(corpus, dim=6, seed=9)
        pipeline = FeaturePipeline(corpus, Setting.epa, store)
        rng = np.random.default_rng(1)
        points = corpus.points_with_counter()
        for _ in range(5):
            point = points[int(rng.integers(len(points)))]
            pool = pipeline.pool(point)
            cand = pool[int(rng.integers(len(pool)))]
            ctx = pipeline.context_for(point)
            ours = extract_features(point, cand, ctx)
            oracle = features_straightline(point, cand, store, ctx.bm25)
            assert ours == pytest.approx(oracle.tolist(), abs=1e-9)

    def test_missing_doc_embedding_raises(self):
        point = make_argument("p", counter_id=None)
        cand = make_argument("c", stance=Stance.con, counter_id=None)
        ctx = pair_context(point, cand)
        bad_store = EmbeddingStore(
            ctx.store.dim,
            {k: ctx.store.get(k) for k in ctx.store.keys() if k != "doc:c"},
        )
        with pytest.raises(FeatureError, match="doc:c"):
            extract_features(point, cand, FeatureContext(bad_store, ctx.bm25))

    def test_sum_and_product_identities(self, small_synthetic):
        corpus = small_synthetic
        store = random_store_for(corpus, seed=2)
        pipeline = FeaturePipeline(corpus, Setting.epa, store)
        point = corpus.points_with_counter()[0]
        cand = pipeline.pool(point)[3]
        x = extract_features(point, cand, pipeline.context_for(point))
        for g in range(5):
            lo, hi, prod, total = x[4 * g : 4 * g + 4]
            assert total == pytest.approx(lo + hi, abs=1e-12)
            assert prod == pytest.approx(lo * hi, abs=1e-12)

    def test_golden_vector_frozen_ordering(self):
        point = make_argument(
            "p",
            conclusion="ban smoking now",
            premise="smoking harms bystanders badly",
            counter_id=None,
        )
        cand = make_argument(
            "c",
            stance=Stance.con,
            conclusion="bans overreach",
            premise="adults accept smoking risks",
            counter_id=None,
        )
        ctx = pair_context(point, cand, dim=4, seed=123)
        got = extract_features(point, cand, ctx)
        # computed once with the straight-line oracle and frozen; any change
        # to the Table-1 ordering or a metric breaks this
        golden = np.array(
            [
                0.37499999999999994,
                0.375,
                0.14062499999999997,
                0.75,
                0.5338070193208898,
                0.5442513425035211,
                0.29052518690319734,
                1.0780583618244108,
                0.2041241452319315,
                0.23570226039551584,
                0.048112522432468816,
                0.43982640562744735,
                0.18824536188834304,
                0.18824536188834304,
                0.035436316272473234,
                0.3764907237766861,
                0.4312232255490678,
                0.4312232255490678,
                0.18595347025294218,
                0.8624464510981356,
            ]
        )
        assert FEATURE_NAMES[0] == "tf_manhattan_min"
        assert FEATURE_NAMES[19] == "doc_cosine_sum"
        assert got == pytest.approx(golden.tolist(), abs=1e-12)


class TestStandardizer:
    def test_two_vector_example(self):
        s = fit_standardizer([np.zeros(20), np.full(20, 2.0)])
        assert s.mean.tolist() == pytest.approx([1.0] * 20)
        assert s.std.tolist() == pytest.approx([1.0] * 20)

    def test_constant_column_clamped(self):
        rows = [np.array([1.0, 2.0]), np.array([1.0, 4.0])]
        s = fit_standardizer(rows)
        assert s.std[0] == 1.0
        assert s.std[1] == pytest.approx(1.0)  # population std of {2,4}

    def test_transformed_train_set_is_zero_mean_unit_std(self):
        rng = np.random.default_rng(0)
        rows = rng.normal(2.0, 3.0, size=(200, N_FEATURES))
        s = fit_standardizer(rows)
        z = np.stack([apply_standardizer(s, r) for r in rows])
        assert np.abs(z.mean(axis=0)).max() < 1e-9
        assert np.abs(z.std(axis=0) - 1.0).max() < 1e-9

    def test_apply_at_mean_gives_zero(self):
        s = fit_standardizer([np.zeros(3), np.ones(3)])
        assert apply_standardizer(s, s.mean).tolist() == pytest.approx([0.0] * 3)

    def test_not_idempotent(self):
        s = fit_standardizer([np.zeros(2), np.array([2.0, 4.0])])
        x = np.array([5.0, 5.0])
        once = apply_standardizer(s, x)
        twice = apply_standardizer(s, once)
        assert not np.allclose(once, twice)

    def test_round_trip_via_inverse(self):
        rng = np.random.default_rng(4)
        rows = rng.normal(size=(10, 6))
        s = fit_standardizer(rows)
        x = rng.normal(size=6)
        assert invert_standardizer(s, apply_standardizer(s, x)) == pytest.approx(
            x.tolist(), abs=1e-12
        )

    def test_requires_two_rows(self):
        with pytest.raises(ValueError):
            fit_standardizer([np.zeros(4)])


class TestFeatureCache:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(8)
        rows = [
            FeatureRow(f"p{i}", f"c{i}", i % 2, rng.normal(size=N_FEATURES))
            for i in range(7)
        ]
        path = tmp_path / "f.feat"
        save_feature_cache(rows, path)
        loaded = load_feature_cache(path)
        assert len(loaded) == 7
        for a, b in zip(rows, loaded):
            assert (a.point_id, a.candidate_id, a.label) == (
                b.point_id,
                b.candidate_id,
                b.label,
            )
            assert a.features.tobytes() == b.features.tobytes()

    def test_truncated(self, tmp_path):
        rows = [FeatureRow("p", "c", 1, np.zeros(N_FEATURES))]
        path = tmp_path / "f.feat"
        save_feature_cache(rows, path)
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(FeatureError, match="truncated"):
            load_feature_cache(path)
