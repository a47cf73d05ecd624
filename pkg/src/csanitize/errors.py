"""Exception hierarchy shared by every csanitize module."""


class CSanitizeError(Exception):
    """Base class for all csanitize errors."""


class InputError(CSanitizeError):
    """Raised for unreadable or malformed user input."""


class EncodingError(InputError):
    """Raised when input bytes are not valid UTF-8."""

    def __init__(self, byte_offset: int, source: str = "<text>"):
        self.byte_offset = byte_offset
        self.source = source
        super().__init__(f"{source}: invalid UTF-8 at byte offset {byte_offset}")


class TaxonomyError(InputError):
    """Raised when a taxonomy file violates the format or forest invariants."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class TaxonomyCycleError(TaxonomyError):
    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("ISA cycle detected: " + " -> ".join(cycle))


class IndexBuildError(InputError):
    """Raised when a corpus index cannot be built (e.g. empty corpus)."""


class IndexFormatError(CSanitizeError):
    """Base class for index file load failures."""


class IndexVersionError(IndexFormatError):
    pass


class IndexChecksumError(IndexFormatError):
    pass


class IndexTruncatedError(IndexFormatError):
    pass


class TaxonomyMismatchError(CSanitizeError):
    """The index was built with a different taxonomy than the one supplied."""


class EntityNotInCorpus(CSanitizeError):
    """A protected entity has zero probability in the reference corpus.

    Its information content is undefined, so no guarantee can be given.
    """

    def __init__(self, entity: str):
        self.entity = entity
        super().__init__(f"protected entity {entity!r} never occurs in the reference corpus")


class GroupBudgetError(CSanitizeError):
    """Group enumeration in one context exceeded the evaluation budget."""

    def __init__(self, context_index: int, budget: int):
        self.context_index = context_index
        self.budget = budget
        super().__init__(
            f"group enumeration in context {context_index} exceeded budget of {budget} subsets"
        )


class VerificationError(CSanitizeError):
    """Internal invariant violation: output still has findings after the removal pass."""

    def __init__(self, residual):
        self.residual = residual
        super().__init__(f"{len(residual)} residual finding(s) after removal pass")
