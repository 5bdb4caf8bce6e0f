from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evoschema.embed import (CoocTable, EmbedError, EmbeddingStore,
                             analogy_scores, build_cooc, cosine,
                             load_word2vec_text, node_vector, npmi,
                             save_word2vec_text)
from evoschema.schema import SchemaNode


class TestCosine:
    def test_self_similarity(self):
        v = [0.3, -1.2, 4.0]
        assert cosine(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine([1, 0], [0, 1]) == pytest.approx(0.0, abs=1e-12)

    def test_hand_value(self):
        # dot = 4, norms = sqrt(5) * sqrt(5)
        assert cosine([1, 2, 0], [2, 1, 0]) == pytest.approx(0.8, abs=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(EmbedError, match="undefined similarity"):
            cosine([0, 0], [1, 2])

    def test_length_mismatch_rejected(self):
        with pytest.raises(EmbedError, match="mismatch"):
            cosine([1, 2], [1, 2, 3])

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=6),
           st.floats(0.1, 10.0))
    @settings(max_examples=60, deadline=None)
    def test_symmetric_and_scale_invariant(self, values, lam):
        a = np.asarray(values)
        b = np.arange(1.0, len(values) + 1.0)
        if np.linalg.norm(a) == 0:
            return
        assert cosine(a, b) == pytest.approx(cosine(b, a), abs=1e-12)
        assert cosine(lam * a, b) == pytest.approx(cosine(a, b), abs=1e-9)


class TestNodeVector:
    def setup_method(self):
        self.store = EmbeddingStore(2, {"trial": np.array([1.0, 0.0]),
                                        "hearing": np.array([0.0, 2.0])})

    def test_single_token(self):
        node = SchemaNode("a", ("trial",), None, "major", "event-type")
        assert np.allclose(node_vector(node, self.store), [1.0, 0.0])

    def test_mean_of_tokens(self):
        node = SchemaNode("a", ("trial", "hearing"), None, "major", "event-type")
        assert np.allclose(node_vector(node, self.store), [0.5, 1.0])

    def test_missing_token_skipped(self, caplog):
        node = SchemaNode("a", ("trial", "ghost"), None, "major", "event-type")
        with caplog.at_level("WARNING"):
            vec = node_vector(node, self.store)
        assert np.allclose(vec, [1.0, 0.0])
        assert any("ghost" in r.message for r in caplog.records)

    def test_all_missing_errors(self):
        node = SchemaNode("a", ("ghost",), None, "major", "event-type")
        with pytest.raises(EmbedError, match="no embeddable"):
            node_vector(node, self.store)


def table_from_counts(total, unigram, pair):
    return CoocTable(window=5, unigram=dict(unigram),
                     pair={frozenset(k): v for k, v in pair.items()},
                     total=total)


class TestNpmi:
    def test_perfect_cooccurrence(self):
        t = table_from_counts(10, {"a": 4, "b": 4}, {("a", "b"): 4})
        assert npmi("a", "b", t, eps=0.0, gamma=1.0) == pytest.approx(1.0, abs=1e-12)

    def test_independence(self):
        # p(a,b) = p(a) p(b): 20 windows, u(a)=10, u(b)=8, pair=4
        t = table_from_counts(20, {"a": 10, "b": 8}, {("a", "b"): 4})
        assert npmi("a", "b", t, eps=0.0, gamma=1.0) == pytest.approx(0.0, abs=1e-12)

    def test_hand_value(self):
        t = table_from_counts(10, {"a": 4, "b": 5}, {("a", "b"): 4})
        expected = math.log(2.0) / (-math.log(0.4))
        assert npmi("a", "b", t, eps=0.0, gamma=1.0) == \
            pytest.approx(expected, abs=1e-12)

    def test_zero_unigram_errors(self):
        t = table_from_counts(10, {"a": 4}, {})
        with pytest.raises(EmbedError, match="zero unigram"):
            npmi("a", "b", t, eps=0.0)

    def test_eps_keeps_zero_pair_finite(self):
        t = table_from_counts(10, {"a": 4, "b": 5}, {})
        value = npmi("a", "b", t, eps=1e-12, gamma=1.0)
        assert math.isfinite(value) and value < 0

    def test_symmetry(self):
        t = table_from_counts(12, {"a": 5, "b": 7}, {("a", "b"): 3})
        assert npmi("a", "b", t) == npmi("b", "a", t)

    @given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 30),
           st.integers(31, 120))
    @settings(max_examples=120, deadline=None)
    def test_bounded_for_eps_zero(self, ua, ub, shared, total):
        pair = min(shared, ua, ub)
        if pair == 0:
            return
        t = table_from_counts(total, {"a": ua, "b": ub}, {("a", "b"): pair})
        value = npmi("a", "b", t, eps=0.0, gamma=1.0)
        assert -1.0 - 1e-9 <= value <= 1.0 + 1e-9


class TestBuildCooc:
    def test_adjacent_pair(self):
        t = build_cooc(["a b"], window=1)
        assert t.pair[frozenset(("a", "b"))] == 1

    def test_repeated_word(self):
        t = build_cooc(["a a"], window=1)
        assert t.pair[frozenset(("a",))] == 1
        assert t.unigram["a"] == 2

    def test_empty_corpus(self):
        t = build_cooc([], window=3)
        assert t.total == 0
        with pytest.raises(EmbedError):
            npmi("a", "b", t)

    def test_window_truncation_keeps_invariants(self):
        corpus = ["a b a", "b c b a", "c c c"]
        t = build_cooc(corpus, window=2)
        for key, count in t.pair.items():
            for w in key:
                assert count <= t.unigram[w]
        for w, count in t.unigram.items():
            assert count <= t.total
        assert t.total == sum(len(s.split()) for s in corpus)

    @given(st.lists(st.lists(st.sampled_from("abcd"), min_size=1, max_size=8),
                    min_size=1, max_size=6),
           st.integers(1, 4))
    @settings(max_examples=80, deadline=None)
    def test_invariants_hold_generally(self, sents, window):
        t = build_cooc([" ".join(s) for s in sents], window=window)
        for key, count in t.pair.items():
            assert count <= min(t.unigram[w] for w in key)
        assert all(c <= t.total for c in t.unigram.values())


class TestAnalogyScores:
    def test_singleton_perfect(self):
        t = table_from_counts(10, {"a": 4}, {("a", "a"): 4})
        scores = analogy_scores(["a"], ["a"], t, eps=0.0, gamma=1.0)
        assert scores["a"] == pytest.approx(1.0, abs=1e-12)

    def test_independent_words_sum_to_zero(self):
        t = table_from_counts(100, {"a": 10, "b": 20, "x": 10},
                              {("a", "x"): 1, ("b", "x"): 2})
        scores = analogy_scores(["a", "b"], ["x"], t, eps=0.0, gamma=1.0)
        assert scores["x"] == pytest.approx(0.0, abs=1e-12)

    def test_matches_brute_force_on_toy_corpus(self):
        rng = random.Random(7)
        words = ["sun", "moon", "tide", "wind", "rain", "leaf"]
        corpus = [" ".join(rng.choices(words, k=rng.randint(3, 9)))
                  for _ in range(20)]
        t = build_cooc(corpus, window=3)
        cand = ["sun", "tide", "rain"]
        lexicon = [w for w in words if t.unigram.get(w)]
        got = analogy_scores(cand, lexicon, t, eps=1e-9, gamma=1.0)

        # independent evaluation of the double sum
        def ref_npmi(wi, wj):
            p_i = t.unigram[wi] / t.total
            p_j = t.unigram[wj] / t.total
            p_ij = t.pair.get(frozenset((wi, wj)), 0) / t.total + 1e-9
            return math.log(p_ij / (p_i * p_j)) / (-math.log(p_ij))

        for wj in lexicon:
            expected = sum(ref_npmi(wi, wj) for wi in cand)
            assert got[wj] == pytest.approx(expected, abs=1e-9)


class TestEmbeddingFile:
    def test_round_trip(self, tmp_path):
        store = EmbeddingStore(3, {"meet": np.array([0.25, -1.5, 3.0]),
                                   "part": np.array([1.0, 2.0, -0.125])})
        path = tmp_path / "vectors.txt"
        save_word2vec_text(store, path)
        first = path.read_text().splitlines()[0]
        assert first == "2 3"
        loaded = load_word2vec_text(path)
        assert loaded.dim == 3
        for word, vec in store.table.items():
            assert np.array_equal(loaded.table[word], vec)

    def test_bad_component_count(self, tmp_path):
        path = tmp_path / "vectors.txt"
        path.write_text("1 3\nmeet 0.5 1.5\n")
        with pytest.raises(EmbedError, match="expected 3 components"):
            load_word2vec_text(path)
