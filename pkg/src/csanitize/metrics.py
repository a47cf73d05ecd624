"""Detection accuracy against a gold annotation, and utility preservation.

Undefined ratios (empty denominators) are returned as ``None`` and never
silently coerced to 0 or 100.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Iterable

from csanitize.errors import InputError
from csanitize.index import CorpusIndex
from csanitize.infotheory import information_content
from csanitize.taxonomy import normalize_term
from csanitize.text import Document, TermOccurrence, decode_utf8


def precision(S: Iterable[str], H: Iterable[str]) -> float | None:
    S, H = set(S), set(H)
    if not S:
        return None
    return len(S & H) / len(S) * 100


def recall(S: Iterable[str], H: Iterable[str]) -> float | None:
    S, H = set(S), set(H)
    if not H:
        return None
    return len(S & H) / len(H) * 100


def f_measure(precision_pct: float | None, recall_pct: float | None) -> float | None:
    """Harmonic mean of two percentages; ``None`` propagates."""
    if precision_pct is None or recall_pct is None:
        return None
    if precision_pct + recall_pct == 0:
        return 0.0
    return 2 * recall_pct * precision_pct / (recall_pct + precision_pct)


@dataclass(frozen=True)
class UtilityBreakdown:
    bits: float
    occurrences: int
    unseen: int  # occurrences of corpus-unseen terms, counted as 0 bits


def utility_breakdown(terms: Iterable[TermOccurrence | str], index: CorpusIndex) -> UtilityBreakdown:
    total = 0.0
    n = unseen = 0
    cache: dict[str, float | None] = {}
    for item in terms:
        t = item.canonical if isinstance(item, TermOccurrence) else item
        if t not in cache:
            ic = information_content(index, t)
            cache[t] = None if ic.unseen else float(ic)
        n += 1
        if cache[t] is None:
            unseen += 1
        else:
            total += cache[t]
    return UtilityBreakdown(total, n, unseen)


def utility(terms: Iterable[TermOccurrence | str] | Document, index: CorpusIndex) -> float:
    """Sum of IC over term occurrences (per occurrence, not per distinct term)."""
    if isinstance(terms, Document):
        terms = terms.occurrences
    return utility_breakdown(terms, index).bits


def preservation_ratio(output_bits: float, original_bits: float) -> float | None:
    if original_bits <= 0:
        return None
    return output_bits / original_bits * 100


def utility_preservation(output_doc: Document, original_doc: Document, index: CorpusIndex) -> float | None:
    return preservation_ratio(utility(output_doc, index), utility(original_doc, index))


@dataclass(frozen=True)
class EvaluationResult:
    doc_id: str
    precision_pct: float | None
    recall_pct: float | None
    f_measure_pct: float | None
    utility_original_bits: float | None = None
    utility_output_bits: float | None = None
    preservation_pct: float | None = None

    def reason(self, name: str) -> str:
        """Why a metric is undefined, for display."""
        return {
            "precision_pct": "no terms detected",
            "recall_pct": "empty gold set",
            "f_measure_pct": "precision or recall undefined",
            "preservation_pct": "original utility is zero",
            "utility_original_bits": "not available",
            "utility_output_bits": "not available",
        }[name]

    def to_dict(self) -> dict:
        out = {}
        for name in (
            "precision_pct", "recall_pct", "f_measure_pct",
            "utility_original_bits", "utility_output_bits", "preservation_pct",
        ):
            value = getattr(self, name)
            out[name] = value if value is not None else {"undefined": self.reason(name)}
        return {"doc_id": self.doc_id, **out}


def evaluate(
    doc_id: str,
    detected: Iterable[str],
    gold: Iterable[str],
    original_bits: float | None = None,
    output_bits: float | None = None,
) -> EvaluationResult:
    p = precision(detected, gold)
    r = recall(detected, gold)
    pres = None
    if original_bits is not None and output_bits is not None:
        pres = preservation_ratio(output_bits, original_bits)
    return EvaluationResult(doc_id, p, r, f_measure(p, r), original_bits, output_bits, pres)


def load_gold(path: str | os.PathLike, canonicalize=None) -> dict[str, frozenset[str]]:
    """Read gold annotations: one ``{doc_id, sensitive_terms}`` object, a list of
    them, or JSON Lines. Terms are canonicalized on load.
    """
    canon = canonicalize or normalize_term
    try:
        text = decode_utf8(open(path, "rb").read(), os.fspath(path))
    except OSError as exc:
        raise InputError(f"cannot read gold file {os.fspath(path)}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
        records = data if isinstance(data, list) else [data]
    except json.JSONDecodeError:
        try:
            records = [json.loads(line) for line in text.splitlines() if line.strip()]
        except json.JSONDecodeError as exc:
            raise InputError(f"{os.fspath(path)}: invalid JSON ({exc})") from exc
    gold = {}
    for rec in records:
        if not isinstance(rec, dict) or "doc_id" not in rec or "sensitive_terms" not in rec:
            raise InputError(f"{os.fspath(path)}: gold records need doc_id and sensitive_terms")
        gold[str(rec["doc_id"])] = frozenset(canon(t) for t in rec["sensitive_terms"])
    return gold
