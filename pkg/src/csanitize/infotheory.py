"""Information content and point-wise mutual information, in bits.

All quantities are computed from integer context counts. Ratios are reduced
to lowest terms before taking logarithms, so algebraically equal quantities
(for instance the PMI of an entity with one of its specializations and the
entity's own information content) produce bit-identical floats.
"""

from __future__ import annotations

import logging
import math
from fractions import Fraction
from typing import Iterable

from csanitize.errors import EntityNotInCorpus
from csanitize.index import CorpusIndex

logger = logging.getLogger(__name__)

INF = math.inf
# Slack tolerated before a PMI above IC(c) is reported as an index defect.
CLAMP_TOLERANCE = 1e-9


class Bits(float):
    """A float in bits that can carry diagnostic flags.

    ``unseen`` marks an information content computed for a term that never
    occurs in the corpus (value is +inf). ``clamped`` marks a PMI that was
    capped at the entity's information content.
    """

    unseen: bool
    clamped: bool

    def __new__(cls, value: float, unseen: bool = False, clamped: bool = False):
        obj = super().__new__(cls, value)
        obj.unseen = unseen
        obj.clamped = clamped
        return obj

    def __repr__(self) -> str:
        flags = "".join(f", {k}=True" for k in ("unseen", "clamped") if getattr(self, k))
        return f"Bits({float(self)!r}{flags})"


def log2_ratio(num: int, den: int) -> float:
    """log2(num/den) for positive integers, stable for equal reduced fractions."""
    frac = Fraction(num, den)
    return math.log2(frac.numerator) - math.log2(frac.denominator)


def information_content(index: CorpusIndex, term: str) -> Bits:
    n_t = index.count([term])
    if n_t == 0:
        return Bits(INF, unseen=True)
    return Bits(log2_ratio(index.total_contexts, n_t))


def _entity_count(index: CorpusIndex, entity: str) -> int:
    n_c = index.count([entity])
    if n_c == 0:
        raise EntityNotInCorpus(entity)
    return n_c


def _pmi_from_counts(n: int, n_c: int, n_t: int, n_ct: int, entity: str) -> Bits:
    if n_ct == 0:
        return Bits(-INF)
    ratio = Fraction(n_ct * n, n_c * n_t)
    ceiling = Fraction(n, n_c)
    if ratio > ceiling:
        raw = log2_ratio(ratio.numerator, ratio.denominator)
        cap = log2_ratio(n, n_c)
        if raw - cap > CLAMP_TOLERANCE:
            logger.warning(
                "PMI with %r exceeds its information content (%.6g > %.6g bits); "
                "index is inconsistent, clamping",
                entity, raw, cap,
            )
        return Bits(cap, clamped=True)
    return Bits(log2_ratio(ratio.numerator, ratio.denominator))


def pmi(index: CorpusIndex, entity: str, term: str) -> Bits:
    """log2 p(c,t) / (p(c) p(t)); -inf when the pair never co-occurs.

    Raises:
        EntityNotInCorpus: ``entity`` has zero probability.
    """
    n_c = _entity_count(index, entity)
    n_t = index.count([term])
    n_ct = index.count([entity, term]) if n_t else 0
    return _pmi_from_counts(index.total_contexts, n_c, n_t, n_ct, entity)


def pmi_group(index: CorpusIndex, entity: str, terms: Iterable[str]) -> Bits:
    """Group PMI of an unordered term set; equals :func:`pmi` for a singleton."""
    group = set(terms)
    if not group:
        raise ValueError("pmi_group needs a non-empty term set")
    n_c = _entity_count(index, entity)
    n_t = index.count(group)
    n_ct = index.count(group | {entity}) if n_t else 0
    return _pmi_from_counts(index.total_contexts, n_c, n_t, n_ct, entity)
