"""Information-theoretic redaction and sanitization of plain-text documents."""

from csanitize.errors import (
    CSanitizeError,
    EntityNotInCorpus,
    GroupBudgetError,
    InputError,
    TaxonomyMismatchError,
    VerificationError,
)
from csanitize.index import CorpusIndex, build_index, load_index, save_index
from csanitize.infotheory import Bits, information_content, pmi, pmi_group
from csanitize.metrics import f_measure, precision, recall, utility, utility_preservation
from csanitize.risk import (
    Mode,
    RiskFinding,
    SanitizationPolicy,
    is_risky_term,
    risky_groups,
    risky_terms,
)
from csanitize.sanitizer import REMOVED, Replacement, SanitizedDocument, Sanitizer, sanitize, select_generalization
from csanitize.taxonomy import Taxonomy, load_taxonomy, normalize_term
from csanitize.text import ContextUnit, Document, Vocabulary, prepare_document, segment_contexts, tokenize

__version__ = "0.1.0"
