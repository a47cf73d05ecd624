import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from csanitize.errors import InputError
from csanitize.metrics import (
    evaluate,
    f_measure,
    load_gold,
    precision,
    recall,
    utility,
    utility_breakdown,
    utility_preservation,
)
from csanitize.text import prepare_document

IC_FEVER = -math.log2(3 / 8)


class TestDetection:
    def test_precision(self):
        assert precision({"a", "b"}, {"a"}) == 50
        assert precision({"a", "b"}, {"a", "b"}) == 100
        assert precision(set(), {"a"}) is None

    def test_recall(self):
        assert recall({"a"}, {"a", "b", "c"}) == pytest.approx(33.3, abs=0.05)
        assert recall({"a"}, set()) is None
        assert recall({"a", "b", "z"}, {"a", "b"}) == 100

    def test_f_measure(self):
        assert f_measure(100, 4) == pytest.approx(7.7, abs=0.05)
        assert f_measure(81.2, 96.3) == pytest.approx(88.1, abs=0.05)
        assert f_measure(42.0, 42.0) == pytest.approx(42.0)
        assert f_measure(0, 0) == 0
        assert f_measure(None, 50) is None

    @given(st.floats(0.01, 100), st.floats(0.01, 100))
    def test_harmonic_mean_bounds(self, p, r):
        f = f_measure(p, r)
        assert min(p, r) - 1e-9 <= f <= max(p, r) + 1e-9

    @given(st.lists(st.sampled_from("abcdef")), st.lists(st.sampled_from("abcdef")))
    def test_order_and_duplicates(self, s, h):
        assert precision(s, h) == precision(sorted(set(s)) * 2, list(reversed(h)))
        assert recall(s, h) == recall(list(reversed(s)), h + h)

    def test_evaluate_undefined_is_explicit(self):
        res = evaluate("d", {"a"}, set())
        assert res.recall_pct is None and res.precision_pct == 0
        assert res.to_dict()["recall_pct"] == {"undefined": "empty gold set"}


class TestUtility:
    def test_f8_doc(self, f8_index, f8_vocab):
        assert utility(prepare_document("d", "aids hiv", f8_vocab), f8_index) == pytest.approx(3.0)

    def test_empty(self, f8_index, f8_vocab):
        assert utility(prepare_document("d", "", f8_vocab), f8_index) == 0

    def test_per_occurrence(self, f8_index, f8_vocab):
        assert utility(prepare_document("d", "aids aids", f8_vocab), f8_index) == pytest.approx(2.0)

    def test_unseen_contributes_zero(self, f8_index):
        b = utility_breakdown(["aids", "zebra", "zebra"], f8_index)
        assert b.bits == 1.0 and b.unseen == 2 and b.occurrences == 3

    @pytest.mark.parametrize(
        "output,expected",
        [
            ("fever", IC_FEVER / (3 + IC_FEVER) * 100),
            ("disease agent fever", (math.log2(8 / 6) + 1 + IC_FEVER) / (3 + IC_FEVER) * 100),
            ("aids hiv fever", 100.0),
        ],
    )
    def test_preservation(self, f8_index, f8_vocab, output, expected):
        orig = prepare_document("o", "aids hiv fever", f8_vocab)
        out = prepare_document("o", output, f8_vocab)
        assert utility_preservation(out, orig, f8_index) == pytest.approx(expected, abs=1e-9)

    def test_preservation_values_rounded(self, f8_index, f8_vocab):
        orig = prepare_document("o", "aids hiv fever", f8_vocab)
        red = utility_preservation(prepare_document("o", "fever", f8_vocab), orig, f8_index)
        san = utility_preservation(prepare_document("o", "disease agent fever", f8_vocab), orig, f8_index)
        assert red == pytest.approx(32.05, abs=0.01)
        assert san == pytest.approx(64.10, abs=0.01)

    def test_zero_utility_original(self, f8_index, f8_vocab):
        empty = prepare_document("o", "", f8_vocab)
        assert utility_preservation(empty, empty, f8_index) is None


class TestGold:
    def test_single_record(self, tmp_path, f8_taxonomy):
        p = tmp_path / "g.json"
        p.write_text(json.dumps({"doc_id": "x", "sensitive_terms": ["AIDS", "Acquired immunodeficiency syndrome"]}))
        assert load_gold(p, f8_taxonomy.canonicalize) == {"x": frozenset({"aids"})}

    def test_list_and_jsonl(self, tmp_path):
        recs = [{"doc_id": "a", "sensitive_terms": ["x"]}, {"doc_id": "b", "sensitive_terms": []}]
        p = tmp_path / "g.json"
        p.write_text(json.dumps(recs))
        q = tmp_path / "g.jsonl"
        q.write_text("\n".join(json.dumps(r) for r in recs))
        assert load_gold(p) == load_gold(q) == {"a": frozenset({"x"}), "b": frozenset()}

    def test_bad_record(self, tmp_path):
        p = tmp_path / "g.json"
        p.write_text(json.dumps({"id": "x"}))
        with pytest.raises(InputError):
            load_gold(p)
