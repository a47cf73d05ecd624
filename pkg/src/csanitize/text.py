"""Tokenization, term extraction and context segmentation.

Every downstream module consumes :class:`Document`. Tokens partition the raw
text exactly (words, whitespace runs and single punctuation characters), so
the original text can always be rebuilt from token surfaces.
"""

from __future__ import annotations

import bisect
import enum
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterable, Mapping, Sequence

from csanitize.errors import EncodingError, InputError
from csanitize.taxonomy import WORD_RE, normalize_term

_TOKEN_RE = re.compile(rf"(?P<word>{WORD_RE.pattern})|(?P<space>\s+)|(?P<punct>.)", re.S)
_BLANK_LINE_RE = re.compile(r"\n[^\S\n]*\n")
# Gaps that a multiword phrase may span: intra-line whitespace, one line break, or a hyphen.
_JOINABLE_GAP_RE = re.compile(r"[^\S\n]*\n?[^\S\n]*|-")
_SENTENCE_END = frozenset(".!?")
_CLOSERS = frozenset("\"')]}’”")


class ContextUnit(str, enum.Enum):
    SENTENCE = "sentence"
    PARAGRAPH = "paragraph"
    DOCUMENT = "document"


@dataclass(frozen=True, slots=True)
class Token:
    """A slice ``raw_text[start:end]``; offsets are code-point indices."""

    surface: str
    start: int
    end: int
    is_word: bool

    @property
    def norm(self) -> str:
        return self.surface.lower()


@dataclass(frozen=True, slots=True)
class ContextSpan:
    unit: ContextUnit
    token_range: tuple[int, int]


@dataclass(frozen=True, slots=True)
class TermOccurrence:
    canonical: str
    token_range: tuple[int, int]
    context_index: int


@dataclass(frozen=True)
class Document:
    doc_id: str
    raw_text: str
    tokens: tuple[Token, ...]
    contexts: tuple[ContextSpan, ...]
    occurrences: tuple[TermOccurrence, ...]

    def terms(self) -> list[str]:
        """Distinct canonical terms in first-occurrence order."""
        return list(dict.fromkeys(o.canonical for o in self.occurrences))

    def context_terms(self) -> list[list[str]]:
        """Distinct terms of each context, in first-occurrence order."""
        per_ctx: list[dict[str, None]] = [{} for _ in self.contexts]
        for occ in self.occurrences:
            per_ctx[occ.context_index][occ.canonical] = None
        return [list(d) for d in per_ctx]

    def char_span(self, occ: TermOccurrence) -> tuple[int, int]:
        lo, hi = occ.token_range
        return self.tokens[lo].start, self.tokens[hi - 1].end

    def surface(self, occ: TermOccurrence) -> str:
        start, end = self.char_span(occ)
        return self.raw_text[start:end]

    def with_unit(self, unit: "ContextUnit | str") -> "Document":
        """Re-segment contexts; the occurrence list itself is unchanged."""
        contexts = segment_contexts(self.tokens, unit)
        if contexts == list(self.contexts):
            return self
        starts = [c.token_range[0] for c in contexts]
        occs = tuple(
            TermOccurrence(o.canonical, o.token_range, bisect.bisect_right(starts, o.token_range[0]) - 1)
            for o in self.occurrences
        )
        return Document(self.doc_id, self.raw_text, self.tokens, tuple(contexts), occs)


def decode_utf8(data: bytes, source: str = "<text>") -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError(exc.start, source) from exc


def tokenize(raw_text: str) -> list[Token]:
    tokens = []
    for m in _TOKEN_RE.finditer(raw_text):
        tokens.append(Token(m.group(0), m.start(), m.end(), m.lastgroup == "word"))
    return tokens


# -- stopwords ---------------------------------------------------------------


def parse_word_list(text: str) -> frozenset[str]:
    words = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            words.add(normalize_term(line))
    return frozenset(words)


def default_stopwords() -> frozenset[str]:
    data = resources.files("csanitize").joinpath("data/stopwords.txt").read_text("utf-8")
    return parse_word_list(data)


def load_stopwords(path: str | os.PathLike) -> frozenset[str]:
    try:
        data = open(path, "rb").read()
    except OSError as exc:
        raise InputError(f"cannot read stopword file {os.fspath(path)}: {exc.strerror}") from exc
    return parse_word_list(decode_utf8(data, os.fspath(path)))


# -- vocabulary and term extraction -----------------------------------------


@dataclass(frozen=True)
class Vocabulary:
    """Multiword phrase table used for greedy longest-match extraction.

    ``phrases`` maps word tuples to canonical terms. Words that match no
    phrase fall back to ``canonicalize`` of the single word.
    """

    phrases: Mapping[tuple[str, ...], str]
    stopwords: frozenset[str] = frozenset()
    canonicalize: Callable[[str], str] = normalize_term
    max_len: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "max_len", max(map(len, self.phrases), default=1))

    @classmethod
    def build(
        cls,
        taxonomy=None,
        extra_terms: Iterable[str] = (),
        stopwords: Iterable[str] | None = None,
    ) -> "Vocabulary":
        """Union of taxonomy surface forms and ``extra_terms`` (corpus terms, entities)."""
        canon = taxonomy.canonicalize if taxonomy is not None else normalize_term
        forms = dict(taxonomy.surface_forms()) if taxonomy is not None else {}
        for term in extra_terms:
            norm = normalize_term(term)
            if norm:
                forms.setdefault(norm, canon(norm))
        phrases = {tuple(form.split(" ")): c for form, c in forms.items()}
        sw = default_stopwords() if stopwords is None else frozenset(stopwords)
        return cls(phrases=phrases, stopwords=sw, canonicalize=canon)


def _joinable(gap: str) -> bool:
    return _JOINABLE_GAP_RE.fullmatch(gap) is not None


def extract_terms(
    tokens: Sequence[Token], raw_text: str, vocab: Vocabulary, contexts: Sequence[ContextSpan]
) -> list[TermOccurrence]:
    """Greedy left-to-right longest match of vocabulary phrases over word tokens."""
    words = [i for i, tok in enumerate(tokens) if tok.is_word]
    norms = [tokens[i].norm for i in words]
    ctx_starts = [c.token_range[0] for c in contexts]
    out = []
    k = 0
    while k < len(words):
        if norms[k] in vocab.stopwords:
            k += 1
            continue
        # extend the run of phrase-joinable words starting at k
        reach = 1
        while reach < vocab.max_len and k + reach < len(words):
            a, b = words[k + reach - 1], words[k + reach]
            if not _joinable(raw_text[tokens[a].end : tokens[b].start]):
                break
            reach += 1
        canonical, length = None, 1
        for n in range(reach, 1, -1):
            hit = vocab.phrases.get(tuple(norms[k : k + n]))
            if hit is not None:
                canonical, length = hit, n
                break
        if canonical is None:
            canonical = vocab.phrases.get((norms[k],)) or vocab.canonicalize(norms[k])
        first, last = words[k], words[k + length - 1]
        ctx = bisect.bisect_right(ctx_starts, first) - 1
        out.append(TermOccurrence(canonical, (first, last + 1), ctx))
        k += length
    return out


# -- context segmentation ----------------------------------------------------


def _starts_upper(tok: Token) -> bool:
    return tok.is_word and tok.surface[0].isupper()


def segment_contexts(tokens: Sequence[Token], unit: ContextUnit | str) -> list[ContextSpan]:
    """Partition ``tokens`` into contexts of the given unit.

    Sentence boundaries follow ``.``, ``!`` or ``?`` (optionally closed by a
    quote or bracket) when whitespace and a capitalized word follow. Blank
    lines delimit paragraphs, and also end sentences.
    """
    unit = ContextUnit(unit)
    n = len(tokens)
    if n == 0:
        return []
    if unit is ContextUnit.DOCUMENT:
        return [ContextSpan(unit, (0, n))]

    boundaries = [0]
    seen_word = False
    for i, tok in enumerate(tokens):
        if tok.is_word:
            seen_word = True
            continue
        if not seen_word or not tok.surface.isspace():
            continue
        cut = False
        if _BLANK_LINE_RE.search(tok.surface):
            cut = True
        elif unit is ContextUnit.SENTENCE:
            j = i - 1
            while j >= 0 and tokens[j].surface in _CLOSERS:
                j -= 1
            if j >= 0 and tokens[j].surface in _SENTENCE_END:
                cut = i + 1 < n and _starts_upper(tokens[i + 1])
        if cut and i + 1 < n:
            boundaries.append(i + 1)
            seen_word = False
    boundaries.append(n)
    return [ContextSpan(unit, (a, b)) for a, b in zip(boundaries, boundaries[1:])]


def prepare_document(
    doc_id: str,
    raw_text: str,
    vocab: Vocabulary,
    unit: ContextUnit | str = ContextUnit.DOCUMENT,
) -> Document:
    tokens = tokenize(raw_text)
    contexts = segment_contexts(tokens, unit)
    occurrences = extract_terms(tokens, raw_text, vocab, contexts)
    return Document(doc_id, raw_text, tuple(tokens), tuple(contexts), tuple(occurrences))
