"""Context-level co-occurrence index over a reference corpus.

Each context (sentence, paragraph or whole document) contributes at most one
count per canonical term. After direct counting, postings are closed upward
through the taxonomy so that an occurrence of a specialization also counts
for all of its ancestors; probabilities therefore never decrease going up
the hierarchy.

On-disk layout (little-endian)::

    b"CSIDX" | version u32 | N u64 | taxonomy fingerprint 32B | unit u8
    | term count u32 | (len u32, utf-8 bytes) * terms
    | (id count u32, varint deltas) * terms | crc32 u32
"""

from __future__ import annotations

import logging
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from csanitize.errors import (
    IndexBuildError,
    IndexChecksumError,
    IndexFormatError,
    IndexTruncatedError,
    IndexVersionError,
    TaxonomyMismatchError,
)
from csanitize.taxonomy import Taxonomy
from csanitize.text import ContextUnit, Document

logger = logging.getLogger(__name__)

MAGIC = b"CSIDX"
FORMAT_VERSION = 1
_UNIT_CODES = {ContextUnit.SENTENCE: 0, ContextUnit.PARAGRAPH: 1, ContextUnit.DOCUMENT: 2}
_UNIT_BY_CODE = {v: k for k, v in _UNIT_CODES.items()}
_EMPTY: frozenset[int] = frozenset()


@dataclass(frozen=True)
class CorpusIndex:
    total_contexts: int
    postings: Mapping[str, frozenset[int]]
    counting_unit: ContextUnit
    taxonomy_fingerprint: bytes

    def __post_init__(self):
        object.__setattr__(self, "postings", MappingProxyType(dict(self.postings)))

    @property
    def vocabulary(self) -> list[str]:
        return sorted(self.postings)

    def contexts_of(self, term: str) -> frozenset[int]:
        return self.postings.get(term, _EMPTY)

    def count(self, terms: Iterable[str]) -> int:
        """Number of contexts containing every term in ``terms``."""
        sets = sorted((self.contexts_of(t) for t in set(terms)), key=len)
        if not sets:
            raise ValueError("count() needs at least one term")
        acc = sets[0]
        for s in sets[1:]:
            if not acc:
                break
            acc = acc & s
        return len(acc)

    def probability(self, terms: Iterable[str]) -> float:
        return self.count(terms) / self.total_contexts

    def check_taxonomy(self, taxonomy: Taxonomy) -> None:
        if taxonomy.fingerprint != self.taxonomy_fingerprint:
            raise TaxonomyMismatchError(
                "index was built with a different taxonomy "
                f"(index {self.taxonomy_fingerprint.hex()[:12]}, "
                f"given {taxonomy.fingerprint.hex()[:12]})"
            )


def close_postings(
    postings: Mapping[str, Iterable[int]], taxonomy: Taxonomy
) -> dict[str, frozenset[int]]:
    """Union every term's contexts into all of its taxonomy ancestors."""
    closed: dict[str, set[int]] = {t: set(ids) for t, ids in postings.items()}
    for term, ids in list(closed.items()):
        for anc in taxonomy.generalizations(term):
            closed.setdefault(anc, set()).update(ids)
    return {t: frozenset(ids) for t, ids in closed.items() if ids}


def build_index(
    corpus_docs: Sequence[Document],
    unit: ContextUnit | str,
    taxonomy: Taxonomy,
) -> CorpusIndex:
    """Count context-level term presence over ``corpus_docs`` and close it upward.

    Raises:
        IndexBuildError: no documents, or no non-empty context in any of them.
    """
    unit = ContextUnit(unit)
    if not corpus_docs:
        raise IndexBuildError("empty corpus")
    direct: dict[str, set[int]] = {}
    n = 0
    for doc in corpus_docs:
        doc = doc.with_unit(unit)
        for terms in doc.context_terms():
            for t in terms:
                direct.setdefault(t, set()).add(n)
            n += 1
    if n == 0:
        raise IndexBuildError("empty corpus: no text in any document")
    postings = close_postings(direct, taxonomy)
    logger.debug("built index: %d contexts, %d terms", n, len(postings))
    return CorpusIndex(n, postings, unit, taxonomy.fingerprint)


# -- serialization -----------------------------------------------------------


def _varint(value: int, out: bytearray) -> None:
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def dump_index(index: CorpusIndex) -> bytes:
    out = bytearray(MAGIC)
    out += struct.pack("<IQ", FORMAT_VERSION, index.total_contexts)
    out += index.taxonomy_fingerprint
    out += struct.pack("<B", _UNIT_CODES[index.counting_unit])
    terms = index.vocabulary
    out += struct.pack("<I", len(terms))
    for t in terms:
        raw = t.encode("utf-8")
        out += struct.pack("<I", len(raw)) + raw
    for t in terms:
        ids = sorted(index.postings[t])
        out += struct.pack("<I", len(ids))
        prev = -1
        for i in ids:
            _varint(i - prev - 1, out)
            prev = i
    out += struct.pack("<I", zlib.crc32(out))
    return bytes(out)


def save_index(index: CorpusIndex, path: str | os.PathLike) -> None:
    """Write atomically: temp file in the target directory, then rename."""
    data = dump_index(index)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".csidx-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, data: bytes, limit: int):
        self.data = data
        self.pos = 0
        self.limit = limit

    def take(self, n: int) -> bytes:
        if self.pos + n > self.limit:
            raise IndexTruncatedError(f"index file truncated at byte {self.limit}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def varint(self) -> int:
        value = shift = 0
        while True:
            (byte,) = self.take(1)
            value |= (byte & 0x7F) << shift
            if byte < 0x80:
                return value
            shift += 7


def parse_index(data: bytes, expected_fingerprint: bytes | None = None) -> CorpusIndex:
    """Decode index bytes, checking structure, checksum, then fingerprint.

    Raises:
        IndexFormatError: not an index file, or structurally invalid content.
        IndexVersionError: unsupported format version.
        IndexTruncatedError: the data ends before the structure does.
        IndexChecksumError: trailing CRC32 does not match.
        TaxonomyMismatchError: ``expected_fingerprint`` differs from the stored one.
    """
    if len(data) < len(MAGIC):
        if MAGIC.startswith(data):
            raise IndexTruncatedError("index file truncated inside header")
        raise IndexFormatError("not a csanitize index file")
    if data[: len(MAGIC)] != MAGIC:
        raise IndexFormatError("not a csanitize index file (bad magic)")
    # the final 4 bytes are the checksum; everything before is structure
    r = _Reader(data, max(len(data) - 4, 0))
    r.take(len(MAGIC))
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise IndexVersionError(f"unsupported index format version {version} (expected {FORMAT_VERSION})")
    (n,) = r.unpack("<Q")
    fingerprint = r.take(32)
    (unit_code,) = r.unpack("<B")
    (n_terms,) = r.unpack("<I")
    terms = []
    for _ in range(n_terms):
        (length,) = r.unpack("<I")
        try:
            terms.append(r.take(length).decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise IndexChecksumError("corrupt term table") from exc
    postings = {}
    for t in terms:
        (count,) = r.unpack("<I")
        ids = []
        prev = -1
        for _ in range(count):
            prev = prev + 1 + r.varint()
            ids.append(prev)
        postings[t] = frozenset(ids)
    if len(data) - r.pos < 4:
        raise IndexTruncatedError("index file truncated before checksum")
    if len(data) - r.pos > 4:
        raise IndexChecksumError("unexpected trailing bytes in index file")
    (stored,) = struct.unpack("<I", data[r.pos :])
    if zlib.crc32(data[: r.pos]) != stored:
        raise IndexChecksumError("index checksum mismatch")
    if unit_code not in _UNIT_BY_CODE:
        raise IndexFormatError(f"unknown counting unit code {unit_code}")
    if n < 1 or any(ids and max(ids) >= n for ids in postings.values()):
        raise IndexFormatError("context id out of range")
    if expected_fingerprint is not None and expected_fingerprint != fingerprint:
        raise TaxonomyMismatchError("index taxonomy fingerprint does not match the given taxonomy")
    return CorpusIndex(n, postings, _UNIT_BY_CODE[unit_code], fingerprint)


def load_index(path: str | os.PathLike, taxonomy: Taxonomy | None = None) -> CorpusIndex:
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_index(data, taxonomy.fingerprint if taxonomy is not None else None)
