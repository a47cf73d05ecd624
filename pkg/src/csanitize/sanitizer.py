"""Replace risky terms by safe generalizations, or remove them.

The flow for one document:

1. detect risky single terms (and, with ``group_max > 1``, minimal risky
   groups, from each of which one member is chosen for replacement);
2. walk each target's generalization chain and keep the first ancestor that
   is below the threshold for every entity, falling back to removal;
3. rewrite every occurrence;
4. re-extract terms from the output and run detection again. Anything still
   flagged is removed and the output is checked again, until clean.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from csanitize.errors import VerificationError
from csanitize.index import CorpusIndex
from csanitize.infotheory import INF, Bits, information_content, pmi
from csanitize.metrics import preservation_ratio, utility_breakdown
from csanitize.risk import (
    Mode,
    RiskFinding,
    SanitizationPolicy,
    _finite_or_str,
    check_entities,
    detect,
    reaches,
)
from csanitize.taxonomy import Taxonomy
from csanitize.text import Document, Vocabulary, prepare_document

logger = logging.getLogger(__name__)

REMOVED = None


@dataclass
class Replacement:
    original: str
    replacement: str | None  # None means REMOVED
    chain_tried: list[tuple[str, dict[str, Bits]]] = field(default_factory=list)
    occurrences_rewritten: int = 0

    @property
    def removed(self) -> bool:
        return self.replacement is REMOVED

    def to_dict(self) -> dict:
        return {
            "original": self.original,
            "replacement": self.replacement,
            "occurrences_rewritten": self.occurrences_rewritten,
            "chain_tried": [
                {"term": g, "max_pmi_bits": _finite_or_str(max(ev.values(), default=-INF))}
                for g, ev in self.chain_tried
            ],
        }


@dataclass
class SanitizedDocument:
    doc_id: str
    output_text: str
    replacements: list[Replacement]
    policy_snapshot: SanitizationPolicy
    findings: list[RiskFinding]
    residual_findings: list[RiskFinding]
    original_doc: Document
    output_doc: Document
    utility_original_bits: float
    utility_output_bits: float
    unseen_occurrences: int
    verification_passes: int

    @property
    def verified(self) -> bool:
        return not self.residual_findings

    @property
    def preservation_pct(self) -> float | None:
        return preservation_ratio(self.utility_output_bits, self.utility_original_bits)

    @property
    def detected_terms(self) -> list[str]:
        """Every term named by a finding (the system's sensitive set)."""
        return list(dict.fromkeys(t for f in self.findings for t in f.terms))

    def report(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "policy": self.policy_snapshot.to_dict(),
            "findings": [f.to_dict() for f in self.findings],
            "replacements": [r.to_dict() for r in self.replacements],
            "utility": {
                "original_bits": self.utility_original_bits,
                "output_bits": self.utility_output_bits,
                "preservation_pct": self.preservation_pct,
                "unseen_occurrences": self.unseen_occurrences,
            },
            "verification": {
                "passes": self.verification_passes,
                "residual_count": len(self.residual_findings),
            },
        }


def generalization_trail(
    term: str,
    entities: Sequence[str],
    alpha: float,
    index: CorpusIndex,
    taxonomy: Taxonomy,
    strict_unseen: bool = False,
) -> tuple[str | None, list[tuple[str, dict[str, Bits]]]]:
    """Most specific safe ancestor of ``term`` and the evidence for each step."""
    thresholds = {c: float(information_content(index, c)) / alpha for c in entities}
    tried = []
    for g in taxonomy.generalizations(term):
        evidence = {c: pmi(index, c, g) for c in entities}
        tried.append((g, evidence))
        if strict_unseen and index.count([g]) == 0:
            continue
        if not any(reaches(evidence[c], thresholds[c]) for c in entities):
            return g, tried
    return REMOVED, tried


def select_generalization(
    term: str,
    entities: Sequence[str],
    alpha: float,
    index: CorpusIndex,
    taxonomy: Taxonomy,
    mode: Mode | str = Mode.SANITIZE,
) -> str | None:
    """First ancestor with PMI strictly below IC(c)/alpha for all entities, else REMOVED."""
    if Mode(mode) is Mode.REDACT:
        return REMOVED
    return generalization_trail(term, entities, alpha, index, taxonomy)[0]


def _match_case(surface: str, replacement: str) -> str:
    if surface[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def render(doc: Document, decisions: dict[str, str | None]) -> tuple[str, list[tuple[int, int, str]], dict[str, int]]:
    """Rewrite ``doc`` according to ``decisions`` (term -> replacement or REMOVED).

    Returns the output text, the output span of every surviving original
    occurrence as ``(start, end, canonical)``, and per-term rewrite counts.
    Removing a term also drops one adjacent whitespace run so that no double
    spaces are left behind; line breaks are preserved.
    """
    starts = {o.token_range[0]: o for o in doc.occurrences}
    pieces: list[str] = []
    ws_flags: list[bool] = []
    length = 0
    spans: list[tuple[int, int, str]] = []
    counts: dict[str, int] = {}
    pending_ws: str | None = None  # whitespace popped before a removal
    drop_next_ws = False
    i = 0
    n = len(doc.tokens)

    def emit(text: str, is_ws: bool) -> None:
        nonlocal length
        pieces.append(text)
        ws_flags.append(is_ws)
        length += len(text)

    while i < n:
        occ = starts.get(i)
        if occ is not None and occ.canonical in decisions:
            decision = decisions[occ.canonical]
            counts[occ.canonical] = counts.get(occ.canonical, 0) + 1
            if decision is REMOVED:
                if pieces and ws_flags[-1]:
                    popped = pieces.pop()
                    ws_flags.pop()
                    length -= len(popped)
                    if pending_ws is None or popped.count("\n") > pending_ws.count("\n"):
                        pending_ws = popped
                elif not pieces:
                    drop_next_ws = True
            else:
                if pending_ws is not None:
                    if "\n" in pending_ws:
                        emit(pending_ws, True)
                    pending_ws = None
                drop_next_ws = False
                text = _match_case(doc.surface(occ), decision)
                spans.append((length, length + len(text), decision))
                emit(text, False)
            i = occ.token_range[1]
            continue

        tok = doc.tokens[i]
        is_ws = tok.surface.isspace()
        if is_ws:
            text = tok.surface
            if drop_next_ws and not pieces:
                text = ""
            elif pending_ws is not None:
                if pending_ws.count("\n") > text.count("\n"):
                    text = pending_ws
            pending_ws = None
            drop_next_ws = False
            if text:
                emit(text, True)
        else:
            if pending_ws is not None and "\n" in pending_ws:
                emit(pending_ws, True)
            pending_ws = None
            drop_next_ws = False
            if occ is not None:
                hi = occ.token_range[1]
                start = length
                emit(doc.raw_text[tok.start : doc.tokens[hi - 1].end], False)
                spans.append((start, length, occ.canonical))
                i = hi
                continue
            emit(tok.surface, False)
        i += 1
    if pending_ws is not None and "\n" in pending_ws:
        emit(pending_ws, True)
    return "".join(pieces), spans, counts


class Sanitizer:
    """Sanitizes documents against one index, taxonomy and policy.

    Instances hold only read-only state and may be shared across threads.
    """

    def __init__(
        self,
        index: CorpusIndex,
        taxonomy: Taxonomy,
        policy: SanitizationPolicy,
        stopwords: Iterable[str] | None = None,
        vocab: Vocabulary | None = None,
    ):
        index.check_taxonomy(taxonomy)
        self.index = index
        self.taxonomy = taxonomy
        self.policy = policy
        if vocab is None:
            vocab = Vocabulary.build(
                taxonomy, extra_terms=[*index.vocabulary, *policy.entities], stopwords=stopwords
            )
        self.vocab = vocab
        self.thresholds = check_entities(index, policy)

    def prepare(self, doc_id: str, text: str) -> Document:
        return prepare_document(doc_id, text, self.vocab, self.policy.context_unit)

    def _group_target(self, finding: RiskFinding, order: dict[str, int]) -> str:
        # strongest individual contributor; ties go to the earliest occurrence
        def key(t):
            return (-pmi(self.index, finding.entity, t), order.get(t, len(order)))

        return min(finding.terms, key=key)

    def _targets(self, doc: Document, findings: list[RiskFinding]) -> list[str]:
        order = {t: i for i, t in enumerate(doc.terms())}
        targets: dict[str, None] = {}
        for f in findings:
            if f.kind == "single":
                targets[f.terms[0]] = None
            else:
                targets[self._group_target(f, order)] = None
        return list(targets)

    def _decide(self, term: str) -> Replacement:
        if self.policy.mode is Mode.REDACT:
            return Replacement(term, REMOVED)
        choice, tried = generalization_trail(
            term, self.policy.entities, self.policy.alpha, self.index, self.taxonomy,
            self.policy.strict_unseen,
        )
        return Replacement(term, choice, tried)

    def _remove_offenders(
        self,
        residual: list[RiskFinding],
        doc: Document,
        out_doc: Document,
        spans: list[tuple[int, int, str]],
        decisions: dict[str, Replacement],
    ) -> None:
        order = {t: i for i, t in enumerate(out_doc.terms())}
        offenders = {
            f.terms[0] if f.kind == "single" else self._group_target(f, order) for f in residual
        }
        sources: set[str] = set()
        for occ in out_doc.occurrences:
            if occ.canonical not in offenders:
                continue
            lo, hi = out_doc.char_span(occ)
            sources.update(c for s, e, c in spans if s < hi and lo < e)
        original_terms = set(doc.terms())
        for src in sources:
            # src may come from replacements, from untouched original text, or both
            for rep in decisions.values():
                if rep.replacement == src:
                    rep.replacement = REMOVED
            if src in original_terms and src not in decisions:
                decisions[src] = Replacement(src, REMOVED)
        logger.info("verification removed %d term(s): %s", len(sources), sorted(sources))

    def sanitize(self, doc: Document) -> SanitizedDocument:
        """Protect ``doc``; the result's ``residual_findings`` is empty on success."""
        policy = self.policy
        doc = doc.with_unit(policy.context_unit)
        findings = detect(doc, self.index, policy)
        decisions = {t: self._decide(t) for t in self._targets(doc, findings)}

        # Each removal round drops at least one term, so this terminates.
        max_passes = len(doc.terms()) + len(decisions) + 2
        passes = 0
        while True:
            text, spans, counts = render(doc, {t: r.replacement for t, r in decisions.items()})
            out_doc = self.prepare(doc.doc_id, text)
            residual = detect(out_doc, self.index, policy)
            passes += 1
            if not residual or passes >= max_passes:
                break
            before = {t: r.replacement for t, r in decisions.items()}
            self._remove_offenders(residual, doc, out_doc, spans, decisions)
            if before == {t: r.replacement for t, r in decisions.items()}:
                break

        for term, rep in decisions.items():
            rep.occurrences_rewritten = counts.get(term, 0)
        before = utility_breakdown(doc.occurrences, self.index)
        after = utility_breakdown(out_doc.occurrences, self.index)
        return SanitizedDocument(
            doc_id=doc.doc_id,
            output_text=text,
            replacements=list(decisions.values()),
            policy_snapshot=policy,
            findings=findings,
            residual_findings=residual,
            original_doc=doc,
            output_doc=out_doc,
            utility_original_bits=before.bits,
            utility_output_bits=after.bits,
            unseen_occurrences=before.unseen,
            verification_passes=passes,
        )

    def sanitize_text(self, doc_id: str, text: str) -> SanitizedDocument:
        return self.sanitize(self.prepare(doc_id, text))


def sanitize(
    doc: Document,
    index: CorpusIndex,
    taxonomy: Taxonomy,
    policy: SanitizationPolicy,
    vocab: Vocabulary | None = None,
) -> SanitizedDocument:
    """Functional entry point.

    Raises:
        TaxonomyMismatchError: ``index`` was built with another taxonomy.
        EntityNotInCorpus: a protected entity never occurs in the corpus.
        GroupBudgetError: group enumeration exceeded its budget.
        VerificationError: findings survived the removal pass.
    """
    result = Sanitizer(index, taxonomy, policy, vocab=vocab).sanitize(doc)
    if result.residual_findings:
        raise VerificationError(result.residual_findings)
    return result
