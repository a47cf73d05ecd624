import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import F8_PARENTS, F8_TEXTS, index_from_contexts, random_corpus
from csanitize.errors import (
    IndexBuildError,
    IndexChecksumError,
    IndexFormatError,
    IndexTruncatedError,
    IndexVersionError,
    TaxonomyMismatchError,
)
from csanitize.index import build_index, close_postings, dump_index, load_index, parse_index, save_index
from csanitize.taxonomy import Taxonomy
from csanitize.text import Vocabulary, prepare_document
from oracles import BruteCorpus

# d1..d8 are context ids 0..7
F8_AIDS = {0, 1, 2, 3}
F8_DISEASE = {0, 1, 2, 3, 4, 5}


def f8_oracle():
    return BruteCorpus([t.split() for t in F8_TEXTS.values()], F8_PARENTS)


class TestBuild:
    def test_f8_counts_match_oracle(self, f8_index):
        oracle = f8_oracle()
        assert f8_index.total_contexts == 8
        assert set(f8_index.postings["aids"]) == F8_AIDS
        assert set(f8_index.postings["disease"]) == F8_DISEASE
        for term in f8_index.vocabulary:
            assert f8_index.count([term]) == oracle.count([term])

    def test_f8_probabilities(self, f8_index):
        assert f8_index.probability(["aids"]) == 0.5
        assert f8_index.probability(["aids", "transfusion", "fever"]) == 1 / 8
        assert f8_index.probability(["unknown-term"]) == 0

    def test_single_document(self):
        idx = index_from_contexts([["fever"]], Taxonomy())
        assert idx.total_contexts == 1 and set(idx.postings["fever"]) == {0}

    def test_empty_corpus(self):
        with pytest.raises(IndexBuildError, match="empty corpus"):
            build_index([], "document", Taxonomy())

    def test_context_counts_once(self):
        idx = index_from_contexts([["a", "a", "a"], ["b"]], Taxonomy())
        assert idx.count(["a"]) == 1

    def test_sentence_unit(self, f8_taxonomy):
        vocab = Vocabulary.build(f8_taxonomy)
        doc = prepare_document("x", "Aids hiv. Fever here. Aids again.", vocab)
        idx = build_index([doc], "sentence", f8_taxonomy)
        assert idx.total_contexts == 3
        assert set(idx.postings["aids"]) == {0, 2}
        assert idx.counting_unit.value == "sentence"

    def test_closure_idempotent(self, f8_index, f8_taxonomy):
        once = dict(f8_index.postings)
        assert close_postings(once, f8_taxonomy) == once


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_index_invariants_random(seed):
    contexts, parents, tax, vocab = random_corpus(seed)
    idx = index_from_contexts(contexts, tax)
    oracle = BruteCorpus(contexts, parents)
    for t in vocab:
        assert idx.count([t]) == oracle.count([t])
        assert all(0 <= i < idx.total_contexts for i in idx.contexts_of(t))
        assert idx.probability([t, t]) == idx.probability([t])
    for child, parent in tax.parents.items():
        assert idx.contexts_of(parent) >= idx.contexts_of(child)
        assert idx.probability([parent]) >= idx.probability([child])
    rng = random.Random(seed)
    for _ in range(10):
        a = rng.sample(vocab, rng.randint(1, 3))
        b = rng.sample(vocab, rng.randint(1, 3))
        assert idx.probability(a + b) <= min(idx.probability(a), idx.probability(b))
        assert idx.count(a + b) == oracle.count(a + b)


class TestSerialization:
    def test_round_trip_f8(self, f8_index, f8_taxonomy, tmp_path):
        path = tmp_path / "f8.csidx"
        save_index(f8_index, path)
        loaded = load_index(path, f8_taxonomy)
        assert loaded.total_contexts == f8_index.total_contexts
        assert loaded.counting_unit == f8_index.counting_unit
        vocab = f8_index.vocabulary + ["unknown"]
        for k in (1, 2, 3):
            for combo in itertools.combinations(vocab, k):
                assert loaded.probability(combo) == f8_index.probability(combo)

    def test_header(self, f8_index):
        data = dump_index(f8_index)
        assert data[:5] == b"CSIDX"
        assert int.from_bytes(data[5:9], "little") == 1
        assert int.from_bytes(data[9:17], "little") == 8
        assert data[17:49] == f8_index.taxonomy_fingerprint

    @pytest.mark.parametrize("cut", [3, 20, 60, -1, -4, -5])
    def test_truncated(self, f8_index, cut):
        data = dump_index(f8_index)
        with pytest.raises(IndexTruncatedError):
            parse_index(data[:cut])

    def test_checksum(self, f8_index):
        data = bytearray(dump_index(f8_index))
        data[30] ^= 0xFF  # inside the fingerprint
        with pytest.raises(IndexChecksumError):
            parse_index(bytes(data))

    def test_version(self, f8_index):
        data = bytearray(dump_index(f8_index))
        data[5] = 9
        with pytest.raises(IndexVersionError):
            parse_index(bytes(data))

    def test_not_an_index(self):
        with pytest.raises(IndexFormatError):
            parse_index(b"hello world, definitely not an index")

    def test_wrong_taxonomy(self, f8_index, tmp_path):
        path = tmp_path / "f8.csidx"
        save_index(f8_index, path)
        with pytest.raises(TaxonomyMismatchError):
            load_index(path, Taxonomy.from_records(isa=[("aids", "illness")]))
        with pytest.raises(TaxonomyMismatchError):
            f8_index.check_taxonomy(Taxonomy())
