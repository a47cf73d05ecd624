"""Detection of terms and term groups that reveal too much about an entity.

A term ``t`` is risky for entity ``c`` when ``PMI(c;t) >= IC(c)/alpha``; a
group ``T`` is risky when ``PMI(c;T) >= IC(c)/alpha``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

from csanitize.errors import EntityNotInCorpus, GroupBudgetError, InputError
from csanitize.index import CorpusIndex
from csanitize.infotheory import INF, Bits, information_content, pmi, pmi_group
from csanitize.taxonomy import normalize_term
from csanitize.text import ContextUnit, Document

DEFAULT_GROUP_BUDGET = 10_000
# Relative slack so that PMI values mathematically equal to the threshold
# (e.g. log2(3) vs log2(9)/2) count as reaching it despite float rounding.
THRESHOLD_SLACK = 1e-12


class Mode(str, enum.Enum):
    REDACT = "redact"
    SANITIZE = "sanitize"


class PolicyError(InputError, ValueError):
    pass


@dataclass(frozen=True)
class SanitizationPolicy:
    """Protected entities plus the knobs that parameterize the guarantee.

    ``entities`` must already be canonical; use :meth:`create` to
    canonicalize raw strings through a taxonomy.
    """

    entities: tuple[str, ...]
    alpha: float = 1.0
    mode: Mode = Mode.SANITIZE
    context_unit: ContextUnit = ContextUnit.DOCUMENT
    group_max: int = 1
    strict_unseen: bool = False
    group_budget: int = DEFAULT_GROUP_BUDGET

    def __post_init__(self):
        entities = tuple(dict.fromkeys(e for e in self.entities))
        if not entities or not all(entities):
            raise PolicyError("at least one non-empty protected entity is required")
        if not self.alpha >= 1:
            raise PolicyError(f"alpha must be >= 1 (got {self.alpha})")
        if self.group_max < 1:
            raise PolicyError(f"group_max must be >= 1 (got {self.group_max})")
        if self.group_budget < 1:
            raise PolicyError("group_budget must be positive")
        object.__setattr__(self, "entities", entities)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "context_unit", ContextUnit(self.context_unit))

    @classmethod
    def create(cls, entities: Iterable[str], taxonomy=None, **kwargs) -> "SanitizationPolicy":
        canon = taxonomy.canonicalize if taxonomy is not None else normalize_term
        return cls(entities=tuple(canon(e) for e in entities), **kwargs)

    def to_dict(self) -> dict:
        return {
            "entities": list(self.entities),
            "alpha": self.alpha,
            "mode": self.mode.value,
            "context_unit": self.context_unit.value,
            "group_max": self.group_max,
            "strict_unseen": self.strict_unseen,
        }


@dataclass(frozen=True)
class RiskCheck:
    """Both sides of one risk comparison; truthy iff risky."""

    risky: bool
    entity: str
    pmi_bits: Bits
    threshold_bits: float

    def __bool__(self) -> bool:
        return self.risky


@dataclass(frozen=True)
class RiskFinding:
    kind: str  # "single" | "group"
    terms: tuple[str, ...]
    entity: str
    pmi_bits: Bits
    threshold_bits: float
    context_index: int | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "terms": list(self.terms),
            "entity": self.entity,
            "pmi_bits": _finite_or_str(self.pmi_bits),
            "threshold_bits": _finite_or_str(self.threshold_bits),
            "context_index": self.context_index,
        }


def _finite_or_str(x: float):
    if x == INF:
        return "inf"
    if x == -INF:
        return "-inf"
    return float(x)


def reaches(value: float, threshold: float) -> bool:
    """True iff ``value >= threshold``, with rounding resolved toward risky."""
    return value >= threshold - THRESHOLD_SLACK * max(1.0, abs(threshold))


def risk_threshold(index: CorpusIndex, entity: str, alpha: float) -> float:
    """IC(c)/alpha. Raises EntityNotInCorpus for an unseen entity."""
    ic = information_content(index, entity)
    if ic.unseen:
        raise EntityNotInCorpus(entity)
    return float(ic) / alpha


def is_risky_term(index: CorpusIndex, term: str, entity: str, alpha: float) -> RiskCheck:
    threshold = risk_threshold(index, entity, alpha)
    value = pmi(index, entity, term)
    return RiskCheck(reaches(value, threshold), entity, value, threshold)


def check_entities(index: CorpusIndex, policy: SanitizationPolicy) -> dict[str, float]:
    """Thresholds per entity, in policy order."""
    return {c: risk_threshold(index, c, policy.alpha) for c in policy.entities}


def term_risk(
    index: CorpusIndex, term: str, policy: SanitizationPolicy, thresholds: dict[str, float]
) -> RiskFinding | None:
    """First violated entity for ``term`` (policy order), or None."""
    if policy.strict_unseen and index.count([term]) == 0:
        c = policy.entities[0]
        # unseen terms cannot be assessed; treated as worst case
        return RiskFinding("single", (term,), c, Bits(INF, unseen=True), thresholds[c])
    for c, thr in thresholds.items():
        value = pmi(index, c, term)
        if reaches(value, thr):
            return RiskFinding("single", (term,), c, value, thr)
    return None


def risky_terms(doc: Document, index: CorpusIndex, policy: SanitizationPolicy) -> list[RiskFinding]:
    """One finding per distinct risky document term, in first-occurrence order."""
    thresholds = check_entities(index, policy)
    findings = []
    for t in doc.terms():
        f = term_risk(index, t, policy, thresholds)
        if f is not None:
            findings.append(f)
    return findings


def _candidates(alive: Sequence[tuple[int, ...]], alive_set: set[tuple[int, ...]], k: int):
    """Apriori join: k-tuples whose every (k-1)-subtuple is alive."""
    by_prefix: dict[tuple[int, ...], list[int]] = {}
    for tup in alive:
        by_prefix.setdefault(tup[:-1], []).append(tup[-1])
    for prefix, lasts in by_prefix.items():
        lasts.sort()
        for i, a in enumerate(lasts):
            for b in lasts[i + 1 :]:
                cand = prefix + (a, b)
                if all(cand[:j] + cand[j + 1 :] in alive_set for j in range(k - 2)):
                    yield cand


def context_groups(
    index: CorpusIndex,
    pool: Sequence[str],
    policy: SanitizationPolicy,
    thresholds: dict[str, float],
    context_index: int,
) -> list[RiskFinding]:
    """Minimal risky groups of size 2..group_max among ``pool`` (one context).

    Groups grow level by level. A group whose members never co-occur with any
    entity cannot become risky by adding members, so it is not extended.
    Members of groups reported at one level are excluded from larger groups.

    Raises:
        GroupBudgetError: more than ``policy.group_budget`` groups evaluated.
    """
    entities = list(thresholds)
    alive = [(i,) for i, t in enumerate(pool) if any(index.count([t, c]) for c in entities)]
    findings: list[RiskFinding] = []
    excluded: set[int] = set()
    evaluated = 0
    for k in range(2, policy.group_max + 1):
        alive_set = set(alive)
        next_alive = []
        reported_members: set[int] = set()
        for cand in _candidates(alive, alive_set, k):
            if excluded.intersection(cand):
                continue
            evaluated += 1
            if evaluated > policy.group_budget:
                raise GroupBudgetError(context_index, policy.group_budget)
            terms = tuple(pool[i] for i in cand)
            co_occurs = False
            hit = None
            for c in entities:
                value = pmi_group(index, c, terms)
                if value != -INF:
                    co_occurs = True
                if reaches(value, thresholds[c]):
                    hit = RiskFinding("group", terms, c, value, thresholds[c], context_index)
                    break
            if hit is not None:
                findings.append(hit)
                reported_members.update(cand)
            elif co_occurs:
                next_alive.append(cand)
        excluded |= reported_members
        alive = [a for a in next_alive if not excluded.intersection(a)]
        if not alive:
            break
    return findings


def risky_groups(
    doc: Document,
    index: CorpusIndex,
    policy: SanitizationPolicy,
    single_findings: Iterable[RiskFinding] | None = None,
) -> list[RiskFinding]:
    """Minimal risky groups per context, excluding individually risky terms."""
    if policy.group_max < 2:
        return []
    thresholds = check_entities(index, policy)
    if single_findings is None:
        single_findings = risky_terms(doc, index, policy)
    risky = {f.terms[0] for f in single_findings}
    findings = []
    for ci, terms in enumerate(doc.context_terms()):
        pool = [t for t in terms if t not in risky]
        if len(pool) >= 2:
            findings.extend(context_groups(index, pool, policy, thresholds, ci))
    return findings


def detect(doc: Document, index: CorpusIndex, policy: SanitizationPolicy) -> list[RiskFinding]:
    """Single-term findings followed by group findings."""
    singles = risky_terms(doc, index, policy)
    return singles + risky_groups(doc, index, policy, singles)
