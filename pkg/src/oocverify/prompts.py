"""Prompt templates and response parsers.

Template files live in a versioned directory (``templates/v1`` ships with the
package). Syntax:

* ``@system`` / ``@user`` on a line of its own starts a message (default user);
* ``{name}`` is replaced by text;
* ``{image:name}`` becomes an image part;
* ``{#flag}...{/flag}`` is kept only when ``flag`` is truthy.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .client import ChatRequest
from .errors import EmptyEvidence, NoVerdict, OutOfRange, TemplateError, Unparseable
from .model import (
    EvidenceImage,
    EvidenceText,
    ImagePart,
    Judgment,
    Label,
    Message,
    Part,
    RewrittenEvidence,
    Role,
    TextPart,
    Verdict,
)

TEMPLATE_NAMES = ("rerank", "rewrite", "explanation", "ooc", "caption")

_SECTION = re.compile(r"\{#(\w+)\}(.*?)\{/\1\}", re.S)
_IMAGE = re.compile(r"\{image:(\w+)\}")
_VAR = re.compile(r"\{(\w+)\}")
_ROLE_LINE = re.compile(r"^@(system|user)\s*$", re.M)


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    version: str

    def placeholders(self) -> set[str]:
        return set(_VAR.findall(self.body))

    def render(
        self,
        text_vars: Mapping[str, str],
        images: Mapping[str, str] = {},
        flags: Mapping[str, bool] = {},
    ) -> tuple[Message, ...]:
        body = _SECTION.sub(lambda m: m.group(2) if flags.get(m.group(1)) else "", self.body)
        missing = set(_VAR.findall(body)) - set(text_vars)
        missing |= set(_IMAGE.findall(body)) - set(images)
        if missing:
            raise TemplateError(f"template {self.name!r} missing values for {sorted(missing)}")

        chunks = _ROLE_LINE.split(body)
        # split() yields [preamble, role, text, role, text, ...]
        pairs = [("user", chunks[0])] + list(zip(chunks[1::2], chunks[2::2]))
        messages = []
        for role, text in pairs:
            parts = self._parts(text, text_vars, images)
            if parts:
                messages.append(Message(Role(role), parts))
        return tuple(messages)

    @staticmethod
    def _parts(text: str, text_vars: Mapping[str, str], images: Mapping[str, str]) -> list[Part]:
        parts: list[Part] = []
        pos = 0
        for m in _IMAGE.finditer(text):
            parts.append(TextPart(text[pos : m.start()]))
            parts.append(ImagePart(images[m.group(1)]))
            pos = m.end()
        parts.append(TextPart(text[pos:]))
        out: list[Part] = []
        for p in parts:
            if isinstance(p, TextPart):
                filled = _VAR.sub(lambda m: text_vars[m.group(1)], p.text).strip("\n")
                if filled.strip():
                    out.append(TextPart(filled))
            else:
                out.append(p)
        return out


@dataclass(frozen=True)
class TemplateSet:
    templates: Mapping[str, PromptTemplate]
    version: str

    def __getitem__(self, name: str) -> PromptTemplate:
        return self.templates[name]

    @classmethod
    def load(cls, directory: str | Path | None = None) -> "TemplateSet":
        """Load all templates from ``directory`` (default: the bundled v1 set)."""
        if directory is None:
            root = resources.files("oocverify") / "templates" / "v1"
        else:
            root = Path(directory)
        version_file = root / "VERSION"
        try:
            version = version_file.read_text(encoding="utf-8").strip()
        except (FileNotFoundError, NotADirectoryError):
            version = Path(str(root)).name
        templates = {}
        for name in TEMPLATE_NAMES:
            try:
                body = (root / f"{name}.txt").read_text(encoding="utf-8")
            except (FileNotFoundError, NotADirectoryError):
                raise TemplateError(f"template {name}.txt not found in {root}") from None
            templates[name] = PromptTemplate(name, body, version)
        return cls(templates, version)


def format_evidence_list(evidence: Sequence[EvidenceText]) -> str:
    """Numbered list, 1-based; continuation lines are indented four spaces."""
    blocks = []
    for i, item in enumerate(evidence, start=1):
        first, *rest = item.text.split("\n")
        lines = [f"[{i}] {first}"] + ["    " + line for line in rest]
        blocks.append("\n".join(lines))
    return "\n".join(blocks)


_VERDICT_PHRASES = {
    Label.FALSIFIED: "FALSIFIED: the image is used out of context and the claim does not describe it",
    Label.PRISTINE: "PRISTINE: the claim correctly describes the image",
}


@dataclass(frozen=True)
class DecodingConfig:
    model: str = "Qwen2-VL-7B-Instruct"
    # selection and judgment must be reproducible
    rerank_temperature: float = 0.0
    judgment_temperature: float = 0.0
    generation_temperature: float = 0.0
    rerank_max_tokens: int = 8
    generation_max_tokens: int = 256
    judgment_max_tokens: int = 128
    seed: Optional[int] = None


class Prompts:
    """Renders every prompt the pipeline sends to the LVLM."""

    def __init__(self, templates: TemplateSet | None = None, decoding: DecodingConfig | None = None):
        self.templates = templates or TemplateSet.load()
        self.decoding = decoding or DecodingConfig()

    @property
    def version(self) -> str:
        return self.templates.version

    def _request(self, messages, temperature: float, max_tokens: int) -> ChatRequest:
        d = self.decoding
        return ChatRequest(d.model, messages, temperature, max_tokens, d.seed)

    def render_rerank(self, image: str, evidence: Sequence[EvidenceText]) -> ChatRequest:
        if not evidence:
            raise EmptyEvidence("rerank prompt needs at least one evidence item")
        msgs = self.templates["rerank"].render(
            {"evidence_list": format_evidence_list(evidence)}, {"image": image}
        )
        d = self.decoding
        return self._request(msgs, d.rerank_temperature, d.rerank_max_tokens)

    def render_rewrite(self, image: str, selected: EvidenceText) -> ChatRequest:
        msgs = self.templates["rewrite"].render({"evidence": selected.text}, {"image": image})
        d = self.decoding
        return self._request(msgs, d.generation_temperature, d.generation_max_tokens)

    def render_caption(self, image: str) -> ChatRequest:
        msgs = self.templates["caption"].render({}, {"image": image})
        d = self.decoding
        return self._request(msgs, d.generation_temperature, d.generation_max_tokens)

    def render_explanation(
        self, image: str, claim: str, rewritten: RewrittenEvidence, label: Label
    ) -> ChatRequest:
        if not claim.strip():
            raise ValueError("claim must be non-empty")
        msgs = self.templates["explanation"].render(
            {"claim": claim, "rewritten": rewritten.text, "verdict_phrase": _VERDICT_PHRASES[label]},
            {"image": image},
        )
        d = self.decoding
        return self._request(msgs, d.generation_temperature, d.generation_max_tokens)

    def render_ooc(
        self,
        image: str,
        claim: str,
        rewritten: RewrittenEvidence,
        visual: Optional[EvidenceImage] = None,
    ) -> ChatRequest:
        if not claim.strip():
            raise ValueError("claim must be non-empty")
        images = {"image": image}
        if visual is not None:
            images["visual"] = visual.image_ref
        msgs = self.templates["ooc"].render(
            {"claim": claim, "rewritten": rewritten.text},
            images,
            {"visual": visual is not None},
        )
        d = self.decoding
        return self._request(msgs, d.judgment_temperature, d.judgment_max_tokens)


# -- parsers --------------------------------------------------------------------

_INT = re.compile(r"-?\d+")
_VERDICT = re.compile(r"\b(yes|no)\b", re.I)
_SENTENCE_END = re.compile(r"[.!?](?=\s|$)|\n")


def parse_rerank_response(text: str, n: int) -> int:
    """Zero-based index from a 1-based integer answer; surrounding prose is ignored."""
    if n < 1:
        raise ValueError("n must be >= 1")
    m = _INT.search(text)
    if m is None:
        raise Unparseable(text)
    value = int(m.group())
    if not 1 <= value <= n:
        raise OutOfRange(value, n)
    return value - 1


def parse_judgment(text: str) -> Judgment:
    """First Yes/No within the first sentence is the verdict; what follows it is the explanation."""
    stripped = text.strip()
    end = _SENTENCE_END.search(stripped)
    first = stripped if end is None else stripped[: end.end()]
    m = _VERDICT.search(first)
    if m is None:
        raise NoVerdict(text)
    verdict = Verdict.YES if m.group(1).lower() == "yes" else Verdict.NO
    explanation = stripped[m.end() :].lstrip(" \t\r\n.,;:!?-").strip()
    return Judgment(verdict, explanation)
