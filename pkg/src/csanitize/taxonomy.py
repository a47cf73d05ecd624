"""ISA/SYN knowledge base: canonical forms and generalization chains.

File format, one record per line::

    ISA <child> | <parent>
    SYN <alias> | <canonical>

``#`` starts a comment and blank lines are ignored. Fields are separated by
`` | `` so multiword terms need no quoting.
"""

from __future__ import annotations

import hashlib
import os
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

from csanitize.errors import InputError, TaxonomyCycleError, TaxonomyError

# Letters, digits and apostrophes; shared with the tokenizer.
WORD_RE = re.compile(r"(?:[^\W_]|['’])+")

_RECORD_RE = re.compile(r"^(ISA|SYN)\s+(.+?)\s+\|\s+(.+?)\s*$")
# Shorthand for single-word records: ``ISA aids disease``.
_SHORT_RE = re.compile(r"^(ISA|SYN)\s+(\S+)\s+(\S+)$")


def normalize_term(surface: str) -> str:
    """Lowercase and rejoin the word runs of ``surface`` with single spaces."""
    return " ".join(m.group(0) for m in WORD_RE.finditer(surface.lower()))


@dataclass(frozen=True)
class Taxonomy:
    """Immutable single-parent ISA forest plus alias table.

    Build instances through :func:`load_taxonomy` or :meth:`from_records`;
    both validate the forest invariants.
    """

    parents: Mapping[str, str] = field(default_factory=dict)
    synonyms: Mapping[str, str] = field(default_factory=dict)
    # canonical terms declared only through SYN records (``SYN x | x`` included)
    standalone: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "parents", MappingProxyType(dict(self.parents)))
        object.__setattr__(self, "synonyms", MappingProxyType(dict(self.synonyms)))
        object.__setattr__(self, "standalone", frozenset(self.standalone))

    @classmethod
    def from_records(
        cls,
        isa: Iterable[tuple[str, str]] = (),
        syn: Iterable[tuple[str, str]] = (),
    ) -> "Taxonomy":
        """Validate raw (child, parent) and (alias, canonical) pairs."""
        return _build([(None, c, p) for c, p in isa], [(None, a, c) for a, c in syn])

    @property
    def nodes(self) -> frozenset[str]:
        return frozenset(self.parents) | frozenset(self.parents.values())

    @property
    def roots(self) -> frozenset[str]:
        return frozenset(n for n in self.nodes if n not in self.parents)

    def canonicalize(self, surface: str) -> str:
        term = normalize_term(surface)
        # alias chains were verified acyclic at load time
        while term in self.synonyms:
            term = self.synonyms[term]
        return term

    def generalizations(self, term: str) -> list[str]:
        """Ancestors of ``term``, most specific first and root last."""
        chain = []
        node = self.parents.get(term)
        while node is not None:
            chain.append(node)
            node = self.parents.get(node)
        return chain

    def is_strict_ancestor(self, a: str, b: str) -> bool:
        return a in self.generalizations(b)

    def surface_forms(self) -> dict[str, str]:
        """Every known surface form mapped to its canonical term."""
        forms = {n: n for n in self.nodes | self.standalone}
        for alias in self.synonyms:
            forms[alias] = self.canonicalize(alias)
        return forms

    def height(self) -> int:
        return max((len(self.generalizations(n)) for n in self.nodes), default=0)

    @property
    def fingerprint(self) -> bytes:
        """SHA-256 over a canonical serialization; 32 bytes."""
        h = hashlib.sha256()
        for child, parent in sorted(self.parents.items()):
            h.update(f"ISA\t{child}\t{parent}\n".encode())
        for alias, canonical in sorted(self.synonyms.items()):
            h.update(f"SYN\t{alias}\t{canonical}\n".encode())
        for term in sorted(self.standalone):
            h.update(f"TERM\t{term}\n".encode())
        return h.digest()


def _build(isa_rows, syn_rows) -> Taxonomy:
    synonyms: dict[str, str] = {}
    declared: set[str] = set()
    for line_no, alias, canonical in syn_rows:
        a, c = normalize_term(alias), normalize_term(canonical)
        if not a or not c:
            raise TaxonomyError("empty term in SYN record", line_no)
        declared.add(c)
        if a == c:
            continue
        if synonyms.get(a, c) != c:
            raise TaxonomyError(f"alias {a!r} maps to both {synonyms[a]!r} and {c!r}", line_no)
        synonyms[a] = c

    for alias in synonyms:
        seen = [alias]
        term = synonyms[alias]
        while term in synonyms:
            if term in seen:
                raise TaxonomyCycleError(seen[seen.index(term):] + [term])
            seen.append(term)
            term = synonyms[term]

    def resolve(t: str) -> str:
        while t in synonyms:
            t = synonyms[t]
        return t

    parents: dict[str, str] = {}
    for line_no, child, parent in isa_rows:
        c, p = resolve(normalize_term(child)), resolve(normalize_term(parent))
        if not c or not p:
            raise TaxonomyError("empty term in ISA record", line_no)
        if c == p:
            raise TaxonomyCycleError([c, c])
        if parents.get(c, p) != p:
            raise TaxonomyError(
                f"{c!r} has multiple parents ({parents[c]!r}, {p!r})", line_no
            )
        parents[c] = p

    for start in parents:
        path = [start]
        node = parents[start]
        while node in parents:
            if node in path:
                raise TaxonomyCycleError(path[path.index(node):] + [node])
            path.append(node)
            node = parents[node]

    nodes = set(parents) | set(parents.values())
    standalone = {resolve(t) for t in declared} - nodes
    return Taxonomy(parents=parents, synonyms=synonyms, standalone=frozenset(standalone))


def parse_taxonomy(text: str) -> Taxonomy:
    isa_rows, syn_rows = [], []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _RECORD_RE.match(line) or _SHORT_RE.match(line)
        if m is None:
            raise TaxonomyError(f"malformed record: {raw.strip()!r}", line_no)
        kind, left, right = m.groups()
        (isa_rows if kind == "ISA" else syn_rows).append((line_no, left, right))
    return _build(isa_rows, syn_rows)


def load_taxonomy(path: str | os.PathLike) -> Taxonomy:
    """Read and validate a taxonomy file.

    Raises:
        InputError: the file is missing or not UTF-8.
        TaxonomyError: a line is malformed, a child has two parents, or the
            ISA/SYN graph contains a cycle.
    """
    from csanitize.text import decode_utf8

    try:
        data = open(path, "rb").read()
    except OSError as exc:
        raise InputError(f"cannot read taxonomy file {os.fspath(path)}: {exc.strerror}") from exc
    return parse_taxonomy(decode_utf8(data, source=os.fspath(path)))
