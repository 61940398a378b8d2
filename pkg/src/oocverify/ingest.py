"""Line-delimited manifest I/O, corpus validation and stratified subsampling.

A manifest holds one JSON object per line::

    {"id": "s1", "image": "https://...", "claim": "...", "label": "falsified",
     "image_embedding": [...], "claim_embedding": [...],
     "textual_evidence": [{"text": "...", "source_url": "...", "embedding": [...]}],
     "visual_evidence": [{"image": "...", "embedding": [...]}]}

Only ``id``, ``image`` and ``claim`` are required. Optional keys are omitted on
write when absent.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional

from . import prng
from .errors import (
    DuplicateId,
    EmbeddingDimMismatch,
    EmptyCorpus,
    IoFailure,
    MalformedLine,
    ManifestError,
    MissingField,
)
from .model import Embedding, Entry, EvidenceImage, EvidenceSet, EvidenceText, Label, Sample

_SPLITS = ("train", "validation", "test")


@dataclass(frozen=True)
class Corpus:
    entries: tuple[Entry, ...] = ()
    split: str = "custom"

    def __post_init__(self):
        entries = tuple(Entry(*e) for e in self.entries)
        object.__setattr__(self, "entries", entries)
        seen: set[str] = set()
        for e in entries:
            if e.sample.id in seen:
                raise DuplicateId(e.sample.id)
            seen.add(e.sample.id)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Entry]:
        return iter(self.entries)

    @property
    def samples(self) -> list[Sample]:
        return [e.sample for e in self.entries]

    def label_counts(self) -> dict[Optional[Label], int]:
        return dict(Counter(e.sample.label for e in self.entries))

    def by_id(self) -> dict[str, Entry]:
        return {e.sample.id: e for e in self.entries}

    def with_entries(self, entries: Iterable[Entry]) -> "Corpus":
        return Corpus(tuple(entries), self.split)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for e in self.entries:
            h.update(dumps_record(entry_to_dict(e)).encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()[:16]


def split_name(name: str | None) -> str:
    """Normalise a split name; anything outside train/validation/test is custom."""
    if not name:
        return "custom"
    low = name.strip().lower()
    if low in ("val", "valid", "dev"):
        low = "validation"
    return low if low in _SPLITS else f"custom:{name}"


# -- record (de)serialisation ---------------------------------------------------


def _emb_to_json(e: Optional[Embedding]) -> Optional[list[float]]:
    return None if e is None else list(e.values)


def entry_to_dict(entry: Entry) -> dict[str, Any]:
    s, ev = entry
    rec: dict[str, Any] = {"id": s.id, "image": s.image_ref, "claim": s.claim}
    if s.label is not None:
        rec["label"] = s.label.value
    if s.image_embedding is not None:
        rec["image_embedding"] = _emb_to_json(s.image_embedding)
    if s.claim_embedding is not None:
        rec["claim_embedding"] = _emb_to_json(s.claim_embedding)
    textual = []
    for t in ev.textual:
        item: dict[str, Any] = {"text": t.text}
        if t.source_url is not None:
            item["source_url"] = t.source_url
        if t.embedding is not None:
            item["embedding"] = _emb_to_json(t.embedding)
        textual.append(item)
    visual = []
    for v in ev.visual:
        item = {"image": v.image_ref}
        if v.embedding is not None:
            item["embedding"] = _emb_to_json(v.embedding)
        visual.append(item)
    rec["textual_evidence"] = textual
    rec["visual_evidence"] = visual
    return rec


def dumps_record(rec: dict[str, Any]) -> str:
    return json.dumps(rec, ensure_ascii=False, allow_nan=False)


class _DimTracker:
    """First dimension seen per embedding space, across the whole file."""

    def __init__(self):
        self.dims: dict[str, int] = {}

    def check(self, space: str, emb: Optional[Embedding], line_no: int | None):
        if emb is None:
            return
        expected = self.dims.setdefault(space, emb.dim)
        if emb.dim != expected:
            raise EmbeddingDimMismatch(expected, emb.dim, line_no)


def _embedding(raw: Any, where: str, line_no: int | None) -> Optional[Embedding]:
    if raw is None:
        return None
    if not isinstance(raw, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw
    ):
        raise MalformedLine(line_no or 0, f"{where} must be a list of numbers")
    try:
        return Embedding(tuple(raw))
    except ValueError as exc:
        raise MalformedLine(line_no or 0, f"{where}: {exc}") from None


def _text_field(rec: dict, key: str, line_no: int | None, required: bool = True) -> Optional[str]:
    value = rec.get(key)
    if value is None:
        if required:
            raise MissingField(key, line_no)
        return None
    if not isinstance(value, str):
        raise MalformedLine(line_no or 0, f"{key} must be a string")
    if required and not value.strip():
        raise MissingField(key, line_no)
    return value


def entry_from_dict(
    rec: Any, line_no: int | None = None, dims: _DimTracker | None = None
) -> Entry:
    if not isinstance(rec, dict):
        raise MalformedLine(line_no or 0, "record is not a JSON object")
    dims = dims or _DimTracker()
    sid = _text_field(rec, "id", line_no)
    image = _text_field(rec, "image", line_no)
    claim = _text_field(rec, "claim", line_no)
    label = None
    if rec.get("label") is not None:
        try:
            label = Label.parse(str(rec["label"]))
        except ValueError as exc:
            raise MalformedLine(line_no or 0, str(exc)) from None

    image_emb = _embedding(rec.get("image_embedding"), "image_embedding", line_no)
    claim_emb = _embedding(rec.get("claim_embedding"), "claim_embedding", line_no)
    dims.check("image", image_emb, line_no)
    dims.check("claim", claim_emb, line_no)

    textual = []
    raw_textual = rec.get("textual_evidence") or []
    if not isinstance(raw_textual, list):
        raise MalformedLine(line_no or 0, "textual_evidence must be a list")
    for i, item in enumerate(raw_textual):
        if not isinstance(item, dict):
            raise MalformedLine(line_no or 0, f"textual_evidence[{i}] is not an object")
        text = _text_field(item, "text", line_no)
        if text is None or not text:
            raise MissingField(f"textual_evidence[{i}].text", line_no)
        emb = _embedding(item.get("embedding"), f"textual_evidence[{i}].embedding", line_no)
        # textual evidence is compared against the image embedding
        dims.check("image", emb, line_no)
        textual.append(EvidenceText(text, _text_field(item, "source_url", line_no, False), emb))

    visual = []
    raw_visual = rec.get("visual_evidence") or []
    if not isinstance(raw_visual, list):
        raise MalformedLine(line_no or 0, "visual_evidence must be a list")
    for i, item in enumerate(raw_visual):
        if not isinstance(item, dict):
            raise MalformedLine(line_no or 0, f"visual_evidence[{i}] is not an object")
        ref = _text_field(item, "image", line_no)
        emb = _embedding(item.get("embedding"), f"visual_evidence[{i}].embedding", line_no)
        dims.check("claim", emb, line_no)
        visual.append(EvidenceImage(ref, emb))

    try:
        sample = Sample(sid, image, claim, label, image_emb, claim_emb)
    except ValueError as exc:
        raise MalformedLine(line_no or 0, str(exc)) from None
    return Entry(sample, EvidenceSet(tuple(textual), tuple(visual)))


# -- manifests -----------------------------------------------------------------


def load_manifest(path: str | os.PathLike, split: str | None = None) -> Corpus:
    """Parse a manifest; every problem is collected, the first one is raised.

    The raised error carries the full list on ``errors``.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").split("\n")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    entries: list[Entry] = []
    errors: list[ManifestError] = []
    first_line: dict[str, int] = {}
    dims = _DimTracker()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.append(MalformedLine(line_no, exc.msg))
            continue
        try:
            entry = entry_from_dict(rec, line_no, dims)
        except ManifestError as exc:
            errors.append(exc)
            continue
        sid = entry.sample.id
        if sid in first_line:
            errors.append(DuplicateId(sid, line_no))
            continue
        first_line[sid] = line_no
        entries.append(entry)

    if errors:
        first = errors[0]
        first.errors = errors
        raise first
    return Corpus(tuple(entries), split_name(split))


def save_manifest(corpus: Corpus, path: str | os.PathLike) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            for entry in corpus:
                fh.write(dumps_record(entry_to_dict(entry)))
                fh.write("\n")
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# -- subsampling -----------------------------------------------------------------


def _allocate(sizes: dict[Any, int], total: int) -> dict[Any, int]:
    """Largest-remainder apportionment of ``total`` across strata."""
    n = sum(sizes.values())
    quotas = {k: sizes[k] * total / n for k in sizes}
    alloc = {k: math.floor(q) for k, q in quotas.items()}
    left = total - sum(alloc.values())
    keys = sorted(sizes, key=lambda k: (-(quotas[k] - alloc[k]), _stratum_key(k)))
    for k in keys[:left]:
        alloc[k] += 1
    return alloc


def _stratum_key(label: Optional[Label]) -> str:
    return "" if label is None else label.value


def split_fraction(
    corpus: Corpus, fraction: float, seed: int, stratified: bool = True
) -> Corpus:
    """Deterministic subsample of ``ceil(fraction * N)`` samples.

    With ``stratified`` each label keeps its share to within one sample.
    Selected samples keep their original relative order.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    n = len(corpus)
    if n == 0:
        raise EmptyCorpus("cannot subsample an empty corpus")
    # guard against float noise such as 0.1 * 200 = 20.000000000000004
    total = min(n, math.ceil(round(fraction * n, 9)))

    if not stratified:
        picked = set(prng.permutation(n, prng.derive_seed(seed, "split"))[:total])
    else:
        strata: dict[Optional[Label], list[int]] = {}
        for i, e in enumerate(corpus.entries):
            strata.setdefault(e.sample.label, []).append(i)
        alloc = _allocate({k: len(v) for k, v in strata.items()}, total)
        picked = set()
        for label, idxs in strata.items():
            sub_seed = prng.derive_seed(seed, "split", _stratum_key(label))
            picked.update(prng.shuffled(idxs, sub_seed)[: alloc[label]])

    return corpus.with_entries(e for i, e in enumerate(corpus.entries) if i in picked)
