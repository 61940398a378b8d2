"""Domain types for out-of-context (OOC) image-claim verification.

All types are frozen dataclasses so they can be shared freely between worker
threads. Sequences are stored as tuples for the same reason.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union


class Label(enum.Enum):
    FALSIFIED = "falsified"
    PRISTINE = "pristine"

    @property
    def code(self) -> int:
        return 1 if self is Label.FALSIFIED else 0

    @classmethod
    def from_code(cls, code: int) -> "Label":
        if code == 1:
            return cls.FALSIFIED
        if code == 0:
            return cls.PRISTINE
        raise ValueError(f"label code must be 0 or 1, got {code!r}")

    @classmethod
    def parse(cls, text: str) -> "Label":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown label {text!r}") from None


@dataclass(frozen=True)
class Embedding:
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("embedding must have at least one dimension")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("embedding contains non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Sample:
    """One image-claim pair.

    ``image_embedding`` and ``claim_embedding`` are optional and only needed by
    cosine-based selection.
    """

    id: str
    image_ref: str
    claim: str
    label: Optional[Label] = None
    image_embedding: Optional[Embedding] = None
    claim_embedding: Optional[Embedding] = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("sample id must be non-empty")
        if not self.claim.strip():
            raise ValueError(f"sample {self.id!r}: claim is blank")
        if not self.image_ref:
            raise ValueError(f"sample {self.id!r}: image_ref is empty")


@dataclass(frozen=True)
class EvidenceText:
    text: str
    source_url: Optional[str] = None
    embedding: Optional[Embedding] = None

    def __post_init__(self):
        if not self.text:
            raise ValueError("evidence text must be non-empty")


@dataclass(frozen=True)
class EvidenceImage:
    image_ref: str
    embedding: Optional[Embedding] = None

    def __post_init__(self):
        if not self.image_ref:
            raise ValueError("evidence image_ref must be non-empty")


@dataclass(frozen=True)
class EvidenceSet:
    textual: tuple[EvidenceText, ...] = ()
    visual: tuple[EvidenceImage, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "textual", tuple(self.textual))
        object.__setattr__(self, "visual", tuple(self.visual))


class Entry(NamedTuple):
    sample: Sample
    evidence: EvidenceSet


class Strategy(enum.Enum):
    LVLM_RERANK = "lvlm"
    COSINE_SIM = "cosine"
    RANDOM = "random"

    @classmethod
    def parse(cls, text: "str | Strategy") -> "Strategy":
        if isinstance(text, Strategy):
            return text
        key = text.strip().lower().replace("_", "").replace("-", "")
        aliases = {
            "lvlm": cls.LVLM_RERANK,
            "lvlmrerank": cls.LVLM_RERANK,
            "cosine": cls.COSINE_SIM,
            "cosinesim": cls.COSINE_SIM,
            "random": cls.RANDOM,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown strategy {text!r}") from None


@dataclass(frozen=True)
class EvidenceSelection:
    """Outcome of evidence reranking.

    Exactly one of ``chosen_index`` and ``fallback_caption`` is set.
    ``ranked`` holds the top-k indices (best first) when more than one item was
    requested; its first element is always ``chosen_index``.
    """

    strategy: Strategy
    chosen_index: Optional[int] = None
    score: Optional[float] = None
    fallback_caption: Optional[str] = None
    ranked: tuple[int, ...] = ()

    def __post_init__(self):
        if (self.chosen_index is None) == (self.fallback_caption is None):
            raise ValueError("set exactly one of chosen_index / fallback_caption")
        if self.chosen_index is not None:
            if self.chosen_index < 0:
                raise ValueError("chosen_index must be >= 0")
            ranked = tuple(self.ranked) or (self.chosen_index,)
            if ranked[0] != self.chosen_index:
                raise ValueError("ranked[0] must equal chosen_index")
            object.__setattr__(self, "ranked", ranked)

    def validate_against(self, n: int) -> None:
        if self.chosen_index is not None and not all(0 <= i < n for i in self.ranked):
            raise ValueError(f"selection {self.ranked} out of range for {n} items")


class Origin(enum.Enum):
    REWRITE = "rewrite"
    CAPTION_FALLBACK = "caption_fallback"


@dataclass(frozen=True)
class RewrittenEvidence:
    text: str
    origin: Origin = Origin.REWRITE

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("rewritten evidence must be non-empty")


class Verdict(enum.Enum):
    YES = "Yes"
    NO = "No"

    @property
    def label(self) -> Label:
        # the tuning question asks whether image and claim are consistent
        return Label.PRISTINE if self is Verdict.YES else Label.FALSIFIED

    @classmethod
    def for_label(cls, label: Label) -> "Verdict":
        return cls.YES if label is Label.PRISTINE else cls.NO


@dataclass(frozen=True)
class Judgment:
    verdict: Verdict
    explanation: str = ""

    @property
    def predicted_label(self) -> Label:
        return self.verdict.label

    def to_text(self) -> str:
        if not self.explanation:
            return f"{self.verdict.value}."
        return f"{self.verdict.value}. {self.explanation}"


class Role(enum.Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    ref: str


Part = Union[TextPart, ImagePart]


@dataclass(frozen=True)
class Message:
    role: Role
    content: tuple[Part, ...]

    def __post_init__(self):
        object.__setattr__(self, "content", tuple(self.content))

    def text(self) -> str:
        return "".join(p.text for p in self.content if isinstance(p, TextPart))


@dataclass(frozen=True)
class InstructionRecord:
    sample_id: str
    messages: tuple[Message, ...]
    target_label: Label

    def __post_init__(self):
        msgs = tuple(self.messages)
        object.__setattr__(self, "messages", msgs)
        roles = [m.role for m in msgs]
        if roles.count(Role.ASSISTANT) != 1 or roles[-1] is not Role.ASSISTANT:
            raise ValueError("record needs exactly one assistant message, last")

    @property
    def assistant_text(self) -> str:
        return self.messages[-1].text()


@dataclass(frozen=True)
class Provenance:
    stage: str
    strategy: str
    cache_hit: bool
    template_version: Optional[str] = None


@dataclass(frozen=True)
class StageRecord:
    sample_id: str
    selection: EvidenceSelection
    rewritten: RewrittenEvidence
    visual_selection: Optional[EvidenceSelection] = None
    explanation: Optional[str] = None
    provenance: tuple[Provenance, ...] = field(default=())
