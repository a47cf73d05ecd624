"""``csanitize`` command line: build an index, sanitize documents, evaluate.

Exit codes: 0 success, 1 internal error or failed verification, 2 input
error, 3 protected entity absent from the corpus, 4 group budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from csanitize.errors import (
    CSanitizeError,
    EntityNotInCorpus,
    GroupBudgetError,
    IndexFormatError,
    InputError,
    TaxonomyMismatchError,
)
from csanitize.index import build_index, load_index, save_index
from csanitize.metrics import EvaluationResult, evaluate, load_gold
from csanitize.risk import DEFAULT_GROUP_BUDGET, Mode, SanitizationPolicy
from csanitize.sanitizer import Sanitizer
from csanitize.taxonomy import load_taxonomy
from csanitize.text import ContextUnit, Vocabulary, decode_utf8, load_stopwords, prepare_document

log = logging.getLogger("csanitize")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_ENTITY, EXIT_BUDGET = 0, 1, 2, 3, 4


def _setup_logging() -> None:
    level = os.environ.get("CSANITIZE_LOG", "WARNING").upper()
    logging.basicConfig(
        level=int(level) if level.isdigit() else getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def read_documents(paths: list[str], lines: bool = False) -> list[tuple[str, str]]:
    """(doc_id, text) pairs from files, directories of ``.txt`` files, or
    one-document-per-line files, in a deterministic order.
    """
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(p.glob("*.txt")))
        elif p.is_file():
            files.append(p)
        else:
            raise InputError(f"no such file or directory: {p}")
    docs = []
    for f in files:
        text = decode_utf8(f.read_bytes(), str(f))
        if lines:
            for no, line in enumerate(text.splitlines(), start=1):
                if line.strip():
                    docs.append((f"{f.stem}-{no}", line))
        else:
            docs.append((f.stem, text))
    return docs


def write_atomic(path: Path, data: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require_file(path: str, what: str) -> None:
    if not Path(path).is_file():
        raise InputError(f"{what} not found: {path}")


def _stopwords(args):
    return load_stopwords(args.stopwords) if args.stopwords else None


def cmd_build_index(args) -> int:
    _require_file(args.taxonomy, "taxonomy file")
    if not Path(args.corpus).exists():
        raise InputError(f"corpus not found: {args.corpus}")
    taxonomy = load_taxonomy(args.taxonomy)
    t0 = time.perf_counter()
    raw = read_documents([args.corpus], lines=args.lines)
    if not raw:
        raise InputError(f"empty corpus: {args.corpus}")
    vocab = Vocabulary.build(taxonomy, extra_terms=args.term, stopwords=_stopwords(args))
    docs = [prepare_document(doc_id, text, vocab, args.unit) for doc_id, text in raw]
    index = build_index(docs, args.unit, taxonomy)
    save_index(index, args.out)
    elapsed = time.perf_counter() - t0
    print(f"contexts (N): {index.total_contexts}")
    print(f"vocabulary:   {len(index.postings)}")
    print(f"build time:   {elapsed:.3f}s")
    print(f"written:      {args.out}")
    return EXIT_OK


def cmd_sanitize(args) -> int:
    if not args.alpha >= 1:
        raise InputError("alpha must be ≥ 1")
    _require_file(args.index, "index file")
    _require_file(args.taxonomy, "taxonomy file")
    taxonomy = load_taxonomy(args.taxonomy)
    index = load_index(args.index, taxonomy)
    policy = SanitizationPolicy.create(
        args.entity,
        taxonomy,
        alpha=args.alpha,
        mode=args.mode,
        context_unit=args.context,
        group_max=args.group_max,
        strict_unseen=args.strict_unseen,
        group_budget=args.group_budget,
    )
    sanitizer = Sanitizer(index, taxonomy, policy, stopwords=_stopwords(args))
    docs = read_documents(args.inputs, lines=args.lines)
    if not docs:
        raise InputError("no input documents")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def work(item):
        doc_id, text = item
        result = sanitizer.sanitize_text(doc_id, text)
        write_atomic(out_dir / f"{doc_id}.sanitized.txt", result.output_text)
        report = json.dumps(result.report(), indent=2, ensure_ascii=False) + "\n"
        write_atomic(out_dir / f"{doc_id}.report.json", report)
        return result

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(work, docs))

    failed = [r.doc_id for r in results if not r.verified]
    for r in results:
        n_rep = sum(1 for x in r.replacements if not x.removed)
        n_rem = len(r.replacements) - n_rep
        pres = r.preservation_pct
        print(
            f"{r.doc_id}: {len(r.findings)} finding(s), {n_rep} generalized, {n_rem} removed, "
            f"utility {'n/a' if pres is None else f'{pres:.1f}%'}"
            + ("" if r.verified else "  VERIFICATION FAILED")
        )
    if failed:
        log.error("verification failed for: %s", ", ".join(failed))
        return EXIT_INTERNAL
    return EXIT_OK


def _fmt(result: EvaluationResult, name: str) -> str:
    value = getattr(result, name)
    if value is None:
        return f"n/a ({result.reason(name)})"
    return f"{value:.1f}"


def _load_reports(paths: list[str]) -> list[dict]:
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(p.glob("*.report.json")))
        elif p.is_file():
            files.append(p)
        else:
            raise InputError(f"report not found: {p}")
    reports = []
    for f in files:
        try:
            reports.append(json.loads(decode_utf8(f.read_bytes(), str(f))))
        except json.JSONDecodeError as exc:
            raise InputError(f"{f}: invalid JSON ({exc})") from exc
    if not reports:
        raise InputError("no reports found")
    return reports


def cmd_evaluate(args) -> int:
    _require_file(args.gold, "gold file")
    canon = load_taxonomy(args.taxonomy).canonicalize if args.taxonomy else None
    gold = load_gold(args.gold, canon)
    reports = _load_reports(args.reports)
    ids = [r["doc_id"] for r in reports]
    if set(ids) != set(gold):
        missing = sorted(set(gold) - set(ids))
        extra = sorted(set(ids) - set(gold))
        raise InputError(f"gold/report doc id mismatch (no report: {missing}, no gold: {extra})")
    results = []
    for rep in reports:
        detected = {t for f in rep.get("findings", []) for t in f["terms"]}
        util = rep.get("utility", {})
        results.append(
            evaluate(rep["doc_id"], detected, gold[rep["doc_id"]],
                     util.get("original_bits"), util.get("output_bits"))
        )
    cols = [("precision_pct", "precision"), ("recall_pct", "recall"),
            ("f_measure_pct", "f-measure"), ("preservation_pct", "utility")]
    width = max(len("doc_id"), *(len(r.doc_id) for r in results))
    print("  ".join([f"{'doc_id':<{width}}"] + [f"{label:>10}" for _, label in cols]))
    for r in results:
        print("  ".join([f"{r.doc_id:<{width}}"] + [f"{_fmt(r, name):>10}" for name, _ in cols]))
    if args.json:
        payload = json.dumps([r.to_dict() for r in results], indent=2) + "\n"
        if args.json == "-":
            sys.stdout.write(payload)
        else:
            write_atomic(Path(args.json), payload)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csanitize", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build a corpus index")
    p.add_argument("--corpus", required=True, help="directory of .txt files or a single file")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--unit", choices=[u.value for u in ContextUnit], default="document",
                   help="counting unit for co-occurrence (default: document)")
    p.add_argument("--out", required=True)
    p.add_argument("--lines", action="store_true", help="treat each line of a file as a document")
    p.add_argument("--stopwords")
    p.add_argument("--term", action="append", default=[],
                   help="extra (multiword) vocabulary term; repeatable")
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("run", help="sanitize documents")
    p.add_argument("--index", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--entity", action="append", required=True,
                   help="protected entity; repeatable")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--mode", choices=[m.value for m in Mode], default="sanitize")
    p.add_argument("--in", dest="inputs", action="append", required=True,
                   help="input file or directory; repeatable")
    p.add_argument("--lines", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--context", choices=[u.value for u in ContextUnit], default="document")
    p.add_argument("--group-max", type=int, default=1)
    p.add_argument("--group-budget", type=int, default=DEFAULT_GROUP_BUDGET)
    p.add_argument("--strict-unseen", action="store_true")
    p.add_argument("--stopwords")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sanitize)

    p = sub.add_parser("eval", help="score reports against a gold annotation")
    p.add_argument("--report", dest="reports", action="append", required=True,
                   help="report file or directory; repeatable")
    p.add_argument("--gold", required=True)
    p.add_argument("--taxonomy", help="canonicalize gold terms through this taxonomy")
    p.add_argument("--json", help="also write metrics as JSON to this path ('-' for stdout)")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EntityNotInCorpus as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENTITY
    except GroupBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (InputError, IndexFormatError, TaxonomyMismatchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CSanitizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
