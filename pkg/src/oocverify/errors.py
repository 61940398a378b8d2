"""Exception hierarchy shared by every stage of the toolkit."""

from __future__ import annotations


class OocError(Exception):
    """Base class for all errors raised by oocverify."""


# -- manifests ---------------------------------------------------------------


class ManifestError(OocError):
    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        # every error collected while scanning the same file
        self.errors: list[ManifestError] = [self]
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + message)


class MalformedLine(ManifestError):
    def __init__(self, line_no: int, cause: str):
        self.cause = cause
        super().__init__(f"malformed record ({cause})", line_no)


class DuplicateId(ManifestError):
    def __init__(self, sample_id: str, line_no: int | None = None):
        self.sample_id = sample_id
        super().__init__(f"duplicate sample id {sample_id!r}", line_no)


class MissingField(ManifestError):
    def __init__(self, field: str, line_no: int | None = None):
        self.field = field
        super().__init__(f"missing or empty field {field!r}", line_no)


class EmbeddingDimMismatch(ManifestError):
    def __init__(self, expected: int, got: int, line_no: int | None = None):
        self.expected = expected
        self.got = got
        super().__init__(f"embedding dim {got} != expected {expected}", line_no)


class EmptyCorpus(OocError):
    pass


class IoFailure(OocError):
    pass


# -- similarity --------------------------------------------------------------


class DimMismatch(OocError):
    pass


class ZeroVector(OocError):
    def __init__(self, index: int | None = None):
        self.index = index
        where = "" if index is None else f" at item {index}"
        super().__init__(f"zero-norm embedding{where}")


class EmptyItems(OocError):
    pass


class KOutOfRange(OocError):
    pass


# -- endpoint client -----------------------------------------------------------


class ClientError(OocError):
    """Anything that went wrong talking to the chat/embeddings endpoint."""


class TransientError(ClientError):
    """Failure class that the retry loop is allowed to retry."""


class RequestTimeout(TransientError):
    pass


class ConnectionFailed(TransientError):
    pass


class HttpStatus(ClientError):
    def __init__(self, code: int, body: str = ""):
        self.code = code
        self.body = body
        super().__init__(f"HTTP {code}: {body[:200]}")

    @property
    def transient(self) -> bool:
        return self.code == 429 or self.code >= 500


class MalformedResponse(ClientError):
    pass


class RetriesExhausted(ClientError):
    def __init__(self, attempts: int, last_error: Exception):
        self.attempts = attempts
        self.last_error = last_error
        super().__init__(f"gave up after {attempts} attempts: {last_error}")


class EmptyInput(ClientError):
    pass


class DimInconsistent(ClientError):
    pass


# -- prompts -----------------------------------------------------------------


class TemplateError(OocError):
    pass


class EmptyEvidence(OocError):
    pass


class Unparseable(OocError):
    def __init__(self, text: str):
        self.text = text
        super().__init__(f"no integer in rerank response {text[:80]!r}")


class OutOfRange(OocError):
    def __init__(self, value: int, n: int):
        self.value = value
        self.n = n
        super().__init__(f"rerank answer {value} outside 1..{n}")


class NoVerdict(OocError):
    def __init__(self, text: str):
        self.text = text
        super().__init__(f"no Yes/No verdict in {text[:80]!r}")


# -- pipeline / evaluation -------------------------------------------------------


class MissingEmbeddings(OocError):
    pass


class MissingLabel(OocError):
    pass


class EmptyRewrite(OocError):
    pass


class EmptyExplanation(OocError):
    pass


class SampleFailed(OocError):
    """Wraps a per-sample failure with the sample id and stage."""

    def __init__(self, sample_id: str, stage: str, cause: Exception):
        self.sample_id = sample_id
        self.stage = stage
        self.cause = cause
        super().__init__(f"sample {sample_id!r} failed at {stage}: {cause}")


class FailureThresholdExceeded(OocError):
    def __init__(self, failed: int, total: int, threshold: float):
        self.failed = failed
        self.total = total
        self.threshold = threshold
        super().__init__(
            f"{failed}/{total} samples failed, above threshold {threshold:.2%}"
        )


class JournalMismatch(OocError):
    pass


class EmptyPredictions(OocError):
    pass


class InferenceAborted(OocError):
    """The endpoint stayed unavailable; finished samples are in the journal."""

    def __init__(self, completed: int, cause: Exception):
        self.completed = completed
        self.cause = cause
        super().__init__(f"inference aborted after {completed} samples: {cause}")
