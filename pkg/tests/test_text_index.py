import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from jobreco.core import EmptyDocument, UnknownJob
from jobreco.text_index import TfIdfIndex, tokenize

from oracles import tfidf_similar

WORDS = ["python", "java", "sales", "nurse", "remote", "senior", "junior", "data", "cloud", "go"]


def documents(max_size=25):
    doc = st.lists(st.sampled_from(WORDS), min_size=1, max_size=12).map(" ".join)
    return st.dictionaries(st.text("abcdef", min_size=1, max_size=3), doc, min_size=1,
                           max_size=max_size)


def build(docs, inactive=()):
    index = TfIdfIndex()
    for j, text in docs.items():
        index.index_job(j, text)
        if j in inactive:
            index.set_active(j, False)
    return index


class TestTokenize:
    @pytest.mark.parametrize("text,terms", [
        ("Senior Python-Developer (m/w/d)", ["senior", "python", "developer"]),
        ("C++ and C# devs, 40h", ["and", "devs", "40h"]),
        ("Übersetzer*in", ["bersetzer", "in"]),
        ("", []),
    ])
    def test_examples(self, text, terms):
        assert tokenize(text) == terms


class TestTfIdf:
    def test_hand_computed(self):
        # N=3; df: python 2, java 1, sales 2, remote 1
        index = build({"d1": "python java", "d2": "python sales", "d3": "sales remote"})
        idf_common = math.log(4 / 3) + 1
        idf_rare = math.log(4 / 2) + 1
        norm_d1 = math.sqrt(idf_common ** 2 + idf_rare ** 2)
        norm_d2 = math.sqrt(2) * idf_common
        expected = idf_common ** 2 / (norm_d1 * norm_d2)
        assert expected == pytest.approx(0.428046035063, abs=1e-12)
        got = index.similar_to("d1", 2)
        assert [j for j, _ in got] == ["d2", "d3"]
        assert got[0][1] == pytest.approx(expected, abs=1e-12)
        assert got[1][1] == 0.0

    def test_anchor_excluded_and_unknown(self):
        index = build({"a": "python", "b": "python"})
        assert [j for j, _ in index.similar_to("a", 5)] == ["b"]
        with pytest.raises(UnknownJob):
            index.similar_to("zz", 3)

    def test_empty_document_rejected(self):
        with pytest.raises(EmptyDocument):
            TfIdfIndex().index_job("a", "!! ?")

    def test_reindex_replaces_terms(self):
        index = build({"a": "python java", "b": "java", "c": "nurse"})
        index.index_job("a", "nurse")
        assert index.doc_count == 3
        assert index.doc_freq == {"java": 1, "nurse": 2}
        assert index.similar_to("a", 1)[0][0] == "c"

    def test_score_symmetric(self):
        index = build({"a": "python data data", "b": "data cloud", "c": "go"})
        assert index.score("a", "b") == pytest.approx(index.score("b", "a"), abs=1e-15)
        assert index.score("a", "a") == pytest.approx(1.0)

    def test_inactive_hidden(self):
        index = build({"a": "python", "b": "python", "c": "python java"}, inactive={"b"})
        assert [j for j, _ in index.similar_to("a", 5)] == ["c"]

    def test_idf_updates_after_new_document(self):
        index = build({"a": "python java", "b": "python sales"})
        before = index.score("a", "b")
        index.index_job("c", "java java java")
        assert index.score("a", "b") != before


class TestOracle:
    @given(documents(), st.integers(0, 8), st.data())
    def test_matches_oracle(self, docs, k, data):
        keys = sorted(docs)
        anchor = data.draw(st.sampled_from(keys))
        exclude = set(data.draw(st.lists(st.sampled_from(keys), max_size=4)))
        inactive = set(data.draw(st.lists(st.sampled_from(keys), max_size=4)))
        got = build(docs, inactive).similar_to(anchor, k, exclude)
        want = tfidf_similar(docs, anchor, k, exclude, inactive)
        assert [j for j, _ in got] == [j for j, _ in want]
        for (_, a), (_, b) in zip(got, want):
            assert abs(a - b) < 1e-9

    @given(documents(max_size=10))
    def test_scores_in_unit_interval(self, docs):
        index = build(docs)
        for j in docs:
            for _, s in index.similar_to(j, len(docs)):
                assert 0.0 <= s <= 1.0
