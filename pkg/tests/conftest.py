import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from csanitize.index import build_index
from csanitize.taxonomy import Taxonomy, load_taxonomy
from csanitize.text import Vocabulary, prepare_document

DATA = Path(__file__).parent / "data"

F8_TEXTS = {
    "d1": "aids hiv fever",
    "d2": "aids hiv",
    "d3": "aids transfusion fever",
    "d4": "aids transfusion",
    "d5": "disease",
    "d6": "disease",
    "d7": "transfusion agent",
    "d8": "fever agent",
}
F8_PARENTS = {"aids": "disease", "hiv": "virus", "virus": "agent"}


def index_from_contexts(contexts, taxonomy, unit="document"):
    """Index where each inner list of terms is one single-context document."""
    vocab = Vocabulary.build(taxonomy, stopwords=())
    docs = [prepare_document(f"c{i}", " ".join(ctx), vocab) for i, ctx in enumerate(contexts)]
    return build_index(docs, unit, taxonomy)


def random_corpus(seed, max_contexts=12, max_terms=10):
    """A random small corpus: (contexts, parents, taxonomy, vocabulary)."""
    rng = random.Random(seed)
    n_terms = rng.randint(3, max_terms)
    vocab = [f"w{i}" for i in range(n_terms)]
    parents = {}
    for i in range(1, n_terms):
        if rng.random() < 0.4:
            parents[vocab[i]] = vocab[rng.randrange(i)]
    n_ctx = rng.randint(2, max_contexts)
    contexts = []
    for _ in range(n_ctx):
        k = rng.randint(1, min(5, n_terms))
        contexts.append(rng.sample(vocab, k))
    taxonomy = Taxonomy.from_records(isa=parents.items())
    return contexts, parents, taxonomy, vocab


@pytest.fixture(scope="session")
def f8_taxonomy():
    return load_taxonomy(DATA / "f8_taxonomy.txt")


@pytest.fixture(scope="session")
def f8_vocab(f8_taxonomy):
    return Vocabulary.build(f8_taxonomy)


@pytest.fixture(scope="session")
def f8_index(f8_taxonomy, f8_vocab):
    docs = [
        prepare_document(p.stem, p.read_text("utf-8"), f8_vocab)
        for p in sorted((DATA / "f8").glob("*.txt"))
    ]
    return build_index(docs, "document", f8_taxonomy)


# Acceptance summary: one PASS/FAIL line per numbered criterion.
_CRITERIA: dict[int, list] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, [title, 0, 0])
    entry[1] += 1
    entry[2] += 0 if rep.passed else 1


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, runs, failed = _CRITERIA[number]
        status = "FAIL" if failed else "PASS"
        detail = f" ({failed}/{runs} cases failed)" if failed else ""
        terminalreporter.write_line(f"criterion {number:>2} {status}  {title}{detail}")
