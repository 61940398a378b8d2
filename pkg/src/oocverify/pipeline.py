"""Per-sample evidence processing and instruction-dataset construction.

For each image-claim pair: pick the most relevant textual evidence, rewrite it
(or caption the image when no evidence exists), pick the closest visual
evidence by cosine similarity and, for dataset construction, ask the LVLM to
explain the gold label. Batch runs are journaled so an interrupted build can
resume without redoing finished samples.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Optional

import yaml

from . import prng, similarity
from .cache import digest
from .client import ChatRequest, ChatResponse, LvlmClient
from .errors import (
    EmptyExplanation,
    EmptyRewrite,
    FailureThresholdExceeded,
    IoFailure,
    JournalMismatch,
    MissingEmbeddings,
    MissingLabel,
    OocError,
    OutOfRange,
    SampleFailed,
    Unparseable,
)
from .ingest import Corpus
from .model import (
    Entry,
    EvidenceSelection,
    EvidenceSet,
    EvidenceText,
    ImagePart,
    InstructionRecord,
    Judgment,
    Label,
    Message,
    Origin,
    Provenance,
    RewrittenEvidence,
    Role,
    StageRecord,
    Strategy,
    TextPart,
    Verdict,
)
from .prompts import Prompts, parse_rerank_response

log = logging.getLogger(__name__)

# k > 1 evidence items are joined in rank order with this separator
EVIDENCE_JOINER = "\n\n"


@dataclass(frozen=True)
class PipelineSettings:
    textual_strategy: Strategy = Strategy.LVLM_RERANK
    visual_strategy: Strategy = Strategy.COSINE_SIM
    k: int = 1
    seed: int = 0
    balanced: bool = True
    failure_threshold: float = 0.01
    concurrency: int = 8

    def __post_init__(self):
        object.__setattr__(self, "textual_strategy", Strategy.parse(self.textual_strategy))
        object.__setattr__(self, "visual_strategy", Strategy.parse(self.visual_strategy))
        if self.visual_strategy is Strategy.LVLM_RERANK:
            raise ValueError("visual evidence supports cosine or random selection only")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.failure_threshold <= 1.0:
            raise ValueError("failure_threshold must be within [0, 1]")

    def fingerprint_fields(self) -> dict:
        return {
            "textual_strategy": self.textual_strategy.value,
            "visual_strategy": self.visual_strategy.value,
            "k": self.k,
            "seed": self.seed,
            "balanced": self.balanced,
        }


# -- serialisation of pipeline outputs ----------------------------------------------


def _part_to_dict(p) -> dict:
    if isinstance(p, TextPart):
        return {"type": "text", "value": p.text}
    return {"type": "image", "value": p.ref}


def _part_from_dict(d: dict):
    if d["type"] == "text":
        return TextPart(d["value"])
    if d["type"] == "image":
        return ImagePart(d["value"])
    raise ValueError(f"unknown content part type {d['type']!r}")


def messages_to_list(messages: Iterable[Message]) -> list[dict]:
    return [
        {"role": m.role.value, "content": [_part_to_dict(p) for p in m.content]} for m in messages
    ]


def messages_from_list(items: list[dict]) -> tuple[Message, ...]:
    return tuple(
        Message(Role(m["role"]), tuple(_part_from_dict(p) for p in m["content"])) for m in items
    )


def record_to_dict(rec: InstructionRecord, fingerprint: str | None = None) -> dict:
    d: dict[str, Any] = {
        "sample_id": rec.sample_id,
        "messages": messages_to_list(rec.messages),
        "label": rec.target_label.value,
    }
    if fingerprint is not None:
        d["config_fingerprint"] = fingerprint
    return d


def record_from_dict(d: dict) -> InstructionRecord:
    return InstructionRecord(d["sample_id"], messages_from_list(d["messages"]), Label(d["label"]))


def selection_to_dict(sel: Optional[EvidenceSelection]) -> Optional[dict]:
    if sel is None:
        return None
    return {
        "strategy": sel.strategy.value,
        "chosen_index": sel.chosen_index,
        "score": sel.score,
        "fallback_caption": sel.fallback_caption,
        "ranked": list(sel.ranked),
    }


def selection_from_dict(d: Optional[dict]) -> Optional[EvidenceSelection]:
    if d is None:
        return None
    return EvidenceSelection(
        Strategy(d["strategy"]),
        d.get("chosen_index"),
        d.get("score"),
        d.get("fallback_caption"),
        tuple(d.get("ranked") or ()),
    )


def stage_to_dict(st: StageRecord) -> dict:
    return {
        "sample_id": st.sample_id,
        "selection": selection_to_dict(st.selection),
        "rewritten": {"text": st.rewritten.text, "origin": st.rewritten.origin.value},
        "visual_selection": selection_to_dict(st.visual_selection),
        "explanation": st.explanation,
        "provenance": [asdict(p) for p in st.provenance],
    }


def stage_from_dict(d: dict) -> StageRecord:
    return StageRecord(
        d["sample_id"],
        selection_from_dict(d["selection"]),
        RewrittenEvidence(d["rewritten"]["text"], Origin(d["rewritten"]["origin"])),
        selection_from_dict(d.get("visual_selection")),
        d.get("explanation"),
        tuple(Provenance(**p) for p in d.get("provenance", [])),
    )


def write_jsonl(path: str | os.PathLike, rows: Iterable[dict]) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False, sort_keys=False))
                fh.write("\n")
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_jsonl(path: str | os.PathLike) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows


class Journal:
    """Append-only progress log; one JSON line per finished sample.

    The first line records the config fingerprint. Torn lines left by a killed
    process are ignored on load.
    """

    def __init__(self, path: str | os.PathLike, kind: str, fingerprint: str):
        self.path = Path(path)
        self.kind = kind
        self.fingerprint = fingerprint
        self._lock = threading.Lock()

    def load(self) -> dict[str, dict]:
        if not self.path.exists():
            return {}
        done: dict[str, dict] = {}
        with open(self.path, encoding="utf-8") as fh:
            lines = fh.read().split("\n")
        for line in lines:
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError:
                # a writer killed mid-line leaves a torn fragment behind
                log.warning("ignoring torn line in %s", self.path)
                continue
            if "journal" in row:
                if row.get("journal") != self.kind or row.get("config_fingerprint") != self.fingerprint:
                    raise JournalMismatch(
                        f"{self.path} belongs to a different run "
                        f"({row.get('journal')}, {row.get('config_fingerprint')})"
                    )
                continue
            done[row["sample_id"]] = row
        return done

    def open(self) -> None:
        with self._lock:
            fresh = not self.path.exists() or self.path.stat().st_size == 0
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                if not fresh:
                    # start on a clean line if the previous writer was killed mid-line
                    with open(self.path, "rb") as rf:
                        rf.seek(-1, os.SEEK_END)
                        if rf.read(1) != b"\n":
                            fh.write("\n")
                else:
                    header = {"journal": self.kind, "config_fingerprint": self.fingerprint}
                    fh.write(json.dumps(header) + "\n")

    def append(self, row: dict) -> None:
        line = json.dumps(row, ensure_ascii=False) + "\n"
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()


# -- dataset --------------------------------------------------------------------------


@dataclass(frozen=True)
class Reject:
    sample_id: str
    stage: str
    error: str

    def to_dict(self) -> dict:
        return {"sample_id": self.sample_id, "stage": self.stage, "error": self.error}


@dataclass(frozen=True)
class InstructionDataset:
    records: tuple[InstructionRecord, ...]
    config_fingerprint: str
    stages: tuple[StageRecord, ...] = ()
    rejects: tuple[Reject, ...] = ()
    dropped_for_balance: tuple[str, ...] = ()

    @property
    def stats(self) -> dict[str, int]:
        counts = {label.value: 0 for label in Label}
        for r in self.records:
            counts[r.target_label.value] += 1
        return counts

    def __len__(self) -> int:
        return len(self.records)

    def to_jsonl_rows(self) -> list[dict]:
        return [record_to_dict(r, self.config_fingerprint) for r in self.records]

    def save(self, path: str | os.PathLike) -> dict[str, Path]:
        """Write the dataset plus its sidecars; returns every path written."""
        path = Path(path)
        paths = {
            "dataset": path,
            "stages": path.with_name(path.name + ".stages.jsonl"),
            "rejects": path.with_name(path.name + ".rejects.jsonl"),
            "meta": path.with_name(path.name + ".meta.json"),
        }
        write_jsonl(path, self.to_jsonl_rows())
        write_jsonl(
            paths["stages"],
            ({**stage_to_dict(s), "config_fingerprint": self.config_fingerprint} for s in self.stages),
        )
        write_jsonl(
            paths["rejects"],
            ({**r.to_dict(), "config_fingerprint": self.config_fingerprint} for r in self.rejects),
        )
        meta = {
            "config_fingerprint": self.config_fingerprint,
            "records": len(self.records),
            "stats": self.stats,
            "rejected": len(self.rejects),
            "dropped_for_balance": list(self.dropped_for_balance),
        }
        paths["meta"].write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
        return paths


def load_dataset(path: str | os.PathLike) -> list[InstructionRecord]:
    return [record_from_dict(row) for row in read_jsonl(path)]


# -- the pipeline ---------------------------------------------------------------------


class Pipeline:
    def __init__(
        self,
        client: LvlmClient,
        prompts: Prompts | None = None,
        settings: PipelineSettings | None = None,
    ):
        self.client = client
        self.prompts = prompts or Prompts()
        self.settings = settings or PipelineSettings()

    def fingerprint(self) -> str:
        tpl = self.prompts.templates
        payload = {
            "settings": self.settings.fingerprint_fields(),
            "decoding": asdict(self.prompts.decoding),
            "template_version": tpl.version,
            "templates": digest({n: t.body for n, t in tpl.templates.items()}),
            "prng": prng.ALGORITHM,
        }
        return digest(payload)[:16]

    def _chat(self, request: ChatRequest, stage: str, strategy: str, trace: Optional[list]) -> ChatResponse:
        response = self.client.chat(request)
        if trace is not None:
            trace.append(Provenance(stage, strategy, response.cached, self.prompts.version))
        return response

    # textual evidence -------------------------------------------------------

    def _cosine_rank(self, entry: Entry) -> similarity.RankResult:
        s, ev = entry
        if s.image_embedding is None or any(t.embedding is None for t in ev.textual):
            raise MissingEmbeddings(
                f"sample {s.id!r}: cosine selection needs image and evidence embeddings"
            )
        return similarity.rerank_cosine(s.image_embedding, [t.embedding for t in ev.textual])

    def _has_text_embeddings(self, entry: Entry) -> bool:
        s, ev = entry
        return s.image_embedding is not None and all(t.embedding is not None for t in ev.textual)

    def select_textual(
        self,
        entry: Entry,
        strategy: Strategy | str | None = None,
        k: int | None = None,
        trace: Optional[list] = None,
    ) -> EvidenceSelection:
        strategy = Strategy.parse(strategy or self.settings.textual_strategy)
        k = k or self.settings.k
        s, ev = entry
        n = len(ev.textual)
        if n == 0:
            caption = self._chat(
                self.prompts.render_caption(s.image_ref), "select_textual", "caption", trace
            ).text.strip()
            if not caption:
                raise EmptyRewrite(f"sample {s.id!r}: blank caption")
            return EvidenceSelection(strategy, fallback_caption=caption)
        k = min(k, n)

        if strategy is Strategy.COSINE_SIM:
            rank = self._cosine_rank(entry)
            if trace is not None:
                trace.append(Provenance("select_textual", "cosine", False, self.prompts.version))
            top = similarity.top_k(rank, k)
            return EvidenceSelection(strategy, top[0], rank.scores[0], ranked=tuple(top))

        if strategy is Strategy.RANDOM:
            seed = prng.derive_seed(self.settings.seed, "textual", s.id)
            top = similarity.top_k(similarity.rerank_random(n, seed), k)
            if trace is not None:
                trace.append(Provenance("select_textual", "random", False, self.prompts.version))
            return EvidenceSelection(strategy, top[0], ranked=tuple(top))

        response = self._chat(
            self.prompts.render_rerank(s.image_ref, ev.textual), "select_textual", "lvlm", trace
        )
        rank = self._cosine_rank(entry) if self._has_text_embeddings(entry) else None
        try:
            chosen = parse_rerank_response(response.text, n)
        except (Unparseable, OutOfRange) as exc:
            fallback = "cosine" if rank is not None else "first"
            log.warning("sample %s: rerank answer unusable (%s), falling back to %s", s.id, exc, fallback)
            chosen = rank.order[0] if rank is not None else 0
            if trace is not None:
                trace.append(Provenance("select_textual", f"fallback:{fallback}", False, self.prompts.version))
        # further items for k > 1 follow cosine order when available, else retrieval order
        rest = rank.order if rank is not None else range(n)
        ranked = [chosen] + [i for i in rest if i != chosen]
        return EvidenceSelection(strategy, chosen, ranked=tuple(ranked[:k]))

    # rewriting ----------------------------------------------------------------

    def rewrite(
        self, entry: Entry, selection: EvidenceSelection, trace: Optional[list] = None
    ) -> RewrittenEvidence:
        s, ev = entry
        if selection.fallback_caption is not None:
            if trace is not None:
                trace.append(Provenance("rewrite", "caption_fallback", False, self.prompts.version))
            return RewrittenEvidence(selection.fallback_caption, Origin.CAPTION_FALLBACK)
        selection.validate_against(len(ev.textual))
        chosen = [ev.textual[i] for i in selection.ranked]
        if len(chosen) == 1:
            selected = chosen[0]
        else:
            selected = EvidenceText(EVIDENCE_JOINER.join(t.text for t in chosen))
        text = self._chat(
            self.prompts.render_rewrite(s.image_ref, selected), "rewrite", "lvlm", trace
        ).text.strip()
        if not text:
            raise EmptyRewrite(f"sample {s.id!r}: model returned a blank rewrite")
        return RewrittenEvidence(text, Origin.REWRITE)

    # visual evidence -----------------------------------------------------------

    def select_visual(self, entry: Entry, trace: Optional[list] = None) -> Optional[EvidenceSelection]:
        s, ev = entry
        if not ev.visual:
            return None
        if self.settings.visual_strategy is Strategy.RANDOM:
            seed = prng.derive_seed(self.settings.seed, "visual", s.id)
            chosen = similarity.rerank_random(len(ev.visual), seed).order[0]
            if trace is not None:
                trace.append(Provenance("select_visual", "random", False, self.prompts.version))
            return EvidenceSelection(Strategy.RANDOM, chosen)
        if s.claim_embedding is None or any(v.embedding is None for v in ev.visual):
            log.warning("sample %s: visual evidence lacks embeddings, skipping it", s.id)
            if trace is not None:
                trace.append(Provenance("select_visual", "skipped:no-embeddings", False, self.prompts.version))
            return None
        rank = similarity.rerank_cosine(s.claim_embedding, [v.embedding for v in ev.visual])
        if trace is not None:
            trace.append(Provenance("select_visual", "cosine", False, self.prompts.version))
        return EvidenceSelection(Strategy.COSINE_SIM, rank.order[0], rank.scores[0])

    # explanations -------------------------------------------------------------------

    def generate_explanation(
        self, entry: Entry, rewritten: RewrittenEvidence, trace: Optional[list] = None
    ) -> str:
        s = entry.sample
        if s.label is None:
            raise MissingLabel(f"sample {s.id!r} has no label; explanations need ground truth")
        text = self._chat(
            self.prompts.render_explanation(s.image_ref, s.claim, rewritten, s.label),
            "explanation",
            "lvlm",
            trace,
        ).text.strip()
        if not text:
            raise EmptyExplanation(f"sample {s.id!r}: model returned a blank explanation")
        return text

    # whole-sample paths ------------------------------------------------------------------

    def evidence_stages(self, entry: Entry, trace: list, k: int | None = None):
        """Shared front half: textual selection, rewrite, visual selection."""
        stage = "select_textual"
        try:
            selection = self.select_textual(entry, k=k, trace=trace)
            stage = "rewrite"
            rewritten = self.rewrite(entry, selection, trace)
            stage = "select_visual"
            visual = self.select_visual(entry, trace)
        except OocError as exc:
            raise SampleFailed(entry.sample.id, stage, exc) from exc
        return selection, rewritten, visual

    def process_for_dataset(self, entry: Entry) -> tuple[InstructionRecord, StageRecord]:
        s, ev = entry
        trace: list[Provenance] = []
        selection, rewritten, visual = self.evidence_stages(entry, trace, k=1)
        try:
            explanation = self.generate_explanation(entry, rewritten, trace)
        except OocError as exc:
            raise SampleFailed(s.id, "explanation", exc) from exc
        visual_item = ev.visual[visual.chosen_index] if visual is not None else None
        request = self.prompts.render_ooc(s.image_ref, s.claim, rewritten, visual_item)
        target = Judgment(Verdict.for_label(s.label), explanation)
        messages = request.messages + (Message(Role.ASSISTANT, (TextPart(target.to_text()),)),)
        record = InstructionRecord(s.id, messages, s.label)
        stage = StageRecord(s.id, selection, rewritten, visual, explanation, tuple(trace))
        return record, stage

    def _balance_order(self, ids: list[str], label: Label) -> list[str]:
        return prng.shuffled(sorted(ids), prng.derive_seed(self.settings.seed, "balance", label.value))

    def _balanced_subset(self, ids_by_label: dict[Label, list[str]]) -> set[str]:
        if len(ids_by_label) < 2:
            return set()
        m = min(len(v) for v in ids_by_label.values())
        keep: set[str] = set()
        for label, ids in ids_by_label.items():
            keep.update(self._balance_order(ids, label)[:m])
        return keep

    def build_dataset(
        self,
        corpus: Corpus,
        journal_path: str | os.PathLike | None = None,
        on_progress: Callable[[str], None] | None = None,
    ) -> InstructionDataset:
        """Run every sample through the dataset path.

        In balanced mode the majority label is downsampled (seeded) before any
        LVLM call and once more after failures, so both labels end up equal.
        Failed samples go to ``rejects``; the run raises
        :class:`FailureThresholdExceeded` when they exceed the threshold.
        """
        unlabeled = [e.sample.id for e in corpus if e.sample.label is None]
        if unlabeled:
            raise MissingLabel(f"{len(unlabeled)} unlabeled samples, e.g. {unlabeled[0]!r}")
        fp = self.fingerprint()
        entries = list(corpus)
        dropped: list[str] = []
        if self.settings.balanced:
            by_label: dict[Label, list[str]] = {}
            for e in entries:
                by_label.setdefault(e.sample.label, []).append(e.sample.id)
            keep = self._balanced_subset(by_label) if len(by_label) == 2 else set()
            dropped = sorted(e.sample.id for e in entries if e.sample.id not in keep)
            entries = [e for e in entries if e.sample.id in keep]

        journal = Journal(journal_path, "build_dataset", fp) if journal_path else None
        done: dict[str, tuple[InstructionRecord, StageRecord]] = {}
        if journal is not None:
            for sid, row in journal.load().items():
                if "record" in row:
                    done[sid] = (record_from_dict(row["record"]), stage_from_dict(row["stage"]))
            journal.open()

        todo = [e for e in entries if e.sample.id not in done]
        rejects: dict[str, Reject] = {}
        lock = threading.Lock()

        def work(entry: Entry) -> None:
            try:
                record, stage = self.process_for_dataset(entry)
            except SampleFailed as exc:
                log.warning("%s", exc)
                with lock:
                    rejects[exc.sample_id] = Reject(exc.sample_id, exc.stage, repr(exc.cause))
                return
            with lock:
                done[entry.sample.id] = (record, stage)
            if journal is not None:
                journal.append(
                    {"sample_id": entry.sample.id, "record": record_to_dict(record), "stage": stage_to_dict(stage)}
                )
            if on_progress is not None:
                on_progress(entry.sample.id)

        _run_pool(work, todo, self.settings.concurrency)

        total = len(entries)
        if total and len(rejects) / total > self.settings.failure_threshold:
            raise FailureThresholdExceeded(len(rejects), total, self.settings.failure_threshold)

        kept = [done[e.sample.id] for e in entries if e.sample.id in done]
        if self.settings.balanced and kept:
            by_label = {}
            for rec, _ in kept:
                by_label.setdefault(rec.target_label, []).append(rec.sample_id)
            keep = self._balanced_subset(by_label) if len(by_label) == 2 else set()
            extra = sorted(r.sample_id for r, _ in kept if r.sample_id not in keep)
            dropped = sorted(dropped + extra)
            kept = [pair for pair in kept if pair[0].sample_id in keep]

        kept.sort(key=lambda pair: pair[0].sample_id)
        return InstructionDataset(
            records=tuple(r for r, _ in kept),
            config_fingerprint=fp,
            stages=tuple(st for _, st in kept),
            rejects=tuple(sorted(rejects.values(), key=lambda r: r.sample_id)),
            dropped_for_balance=tuple(dropped),
        )


def _run_pool(fn: Callable[[Entry], None], items: list[Entry], workers: int) -> None:
    if workers <= 1 or len(items) <= 1:
        for item in items:
            fn(item)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, item) for item in items]
        try:
            for fut in futures:
                fut.result()
        except BaseException:
            for fut in futures:
                fut.cancel()
            raise


def attach_embeddings(corpus: Corpus, client: LvlmClient) -> Corpus:
    """Fill in missing embeddings from the embeddings endpoint.

    The endpoint must place images and text in one shared space (CLIP-style)
    for the cosine comparisons to be meaningful.
    """
    out = []
    for s, ev in corpus:
        image_emb = s.image_embedding or client.embed([ImagePart(s.image_ref)])[0]
        claim_emb = s.claim_embedding or client.embed([TextPart(s.claim)])[0]
        textual = list(ev.textual)
        missing = [i for i, t in enumerate(textual) if t.embedding is None]
        if missing:
            vecs = client.embed([TextPart(textual[i].text) for i in missing])
            for i, v in zip(missing, vecs):
                textual[i] = replace(textual[i], embedding=v)
        visual = list(ev.visual)
        missing = [i for i, v in enumerate(visual) if v.embedding is None]
        if missing:
            vecs = client.embed([ImagePart(visual[i].image_ref) for i in missing])
            for i, v in zip(missing, vecs):
                visual[i] = replace(visual[i], embedding=v)
        sample = replace(s, image_embedding=image_emb, claim_embedding=claim_emb)
        out.append(Entry(sample, EvidenceSet(tuple(textual), tuple(visual))))
    return corpus.with_entries(out)


# -- training hand-off ---------------------------------------------------------------

TRAINING_DEFAULTS = {
    "base_model": "Qwen2-VL-7B-Instruct",
    "adapter": "LoRA",
    "epochs": 2,
    "batch_size": 8,
    "learning_rate": 2.0e-4,
    "optimizer": "AdamW",
    "lr_schedule": "linear-warmup+cosine",
    "loss": "next-token-prediction",
}


def emit_training_config(
    dataset: InstructionDataset, path: str | os.PathLike, dataset_path: str | os.PathLike
) -> dict:
    """Write the fine-tuning recipe for ``dataset``; training itself happens elsewhere."""
    if not dataset.records:
        raise ValueError("cannot emit a training config for an empty dataset")
    config = dict(TRAINING_DEFAULTS)
    config.update(
        {
            "dataset": str(dataset_path),
            "num_records": len(dataset),
            "label_counts": dataset.stats,
            "config_fingerprint": dataset.config_fingerprint,
        }
    )
    try:
        Path(path).write_text(yaml.safe_dump(config, sort_keys=True), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return config


def read_training_config(path: str | os.PathLike) -> dict:
    return yaml.safe_load(Path(path).read_text(encoding="utf-8"))
