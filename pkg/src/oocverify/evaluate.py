"""OOC inference, accuracy metrics and experiment matrices."""

from __future__ import annotations

import itertools
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import yaml

from . import prng
from .errors import (
    EmptyPredictions,
    HttpStatus,
    InferenceAborted,
    NoVerdict,
    OocError,
    RetriesExhausted,
    SampleFailed,
    TransientError,
)
from .ingest import Corpus, split_fraction
from .model import Entry, Label, Strategy
from .pipeline import Journal, Pipeline, PipelineSettings, _run_pool, write_jsonl
from .prompts import parse_judgment

log = logging.getLogger(__name__)

REPORT_SCHEMA = "oocverify.metrics/v1"

# endpoint failures that survive the retry loop stop the whole run
_FATAL = (RetriesExhausted, TransientError, HttpStatus)


@dataclass(frozen=True, slots=True)
class PredictionRecord:
    sample_id: str
    gold: Label
    predicted: Optional[Label]
    raw_text: str = ""
    latency_ms: float = field(default=0.0, compare=False)
    error: Optional[str] = None

    @property
    def correct(self) -> bool:
        return self.predicted is not None and self.predicted is self.gold

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "gold": self.gold.value,
            "predicted": None if self.predicted is None else self.predicted.value,
            "raw_text": self.raw_text,
            "latency_ms": round(self.latency_ms, 3),
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PredictionRecord":
        return cls(
            d["sample_id"],
            Label(d["gold"]),
            None if d.get("predicted") is None else Label(d["predicted"]),
            d.get("raw_text", ""),
            float(d.get("latency_ms", 0.0)),
            d.get("error"),
        )


_CELLS = ("falsified", "pristine", "unparsed")


@dataclass(frozen=True)
class MetricsReport:
    """Accuracy over all samples and per gold label.

    ``confusion[gold][predicted]`` counts predictions, with ``"unparsed"`` as
    a third predicted column; unparsed predictions count as wrong everywhere.
    Accuracies are ``None`` for a label with no samples or for a failed cell.
    """

    acc_all: Optional[float]
    acc_falsified: Optional[float]
    acc_pristine: Optional[float]
    confusion: dict = field(default_factory=dict)
    n_total: int = 0
    unparsed_count: int = 0
    metadata: dict = field(default_factory=dict)
    cell: dict = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def n_falsified(self) -> int:
        return sum(self.confusion.get("falsified", {}).values())

    @property
    def n_pristine(self) -> int:
        return sum(self.confusion.get("pristine", {}).values())

    def to_dict(self) -> dict:
        return {
            "acc_all": self.acc_all,
            "acc_falsified": self.acc_falsified,
            "acc_pristine": self.acc_pristine,
            "confusion": self.confusion,
            "n_total": self.n_total,
            "unparsed_count": self.unparsed_count,
            "metadata": self.metadata,
            "cell": self.cell,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            d.get("acc_all"),
            d.get("acc_falsified"),
            d.get("acc_pristine"),
            d.get("confusion") or {},
            d.get("n_total", 0),
            d.get("unparsed_count", 0),
            d.get("metadata") or {},
            d.get("cell") or {},
            d.get("error"),
        )


def compute_metrics(preds: Sequence[PredictionRecord], metadata: dict | None = None) -> MetricsReport:
    if not preds:
        raise EmptyPredictions("no predictions to score")
    confusion = {g.value: dict.fromkeys(_CELLS, 0) for g in Label}
    for p in preds:
        if p.gold is None:
            raise ValueError(f"prediction {p.sample_id!r} has no gold label")
        col = "unparsed" if p.predicted is None else p.predicted.value
        confusion[p.gold.value][col] += 1
    n = len(preds)
    correct_f = confusion["falsified"]["falsified"]
    correct_p = confusion["pristine"]["pristine"]
    n_f = sum(confusion["falsified"].values())
    n_p = sum(confusion["pristine"].values())
    return MetricsReport(
        acc_all=(correct_f + correct_p) / n,
        acc_falsified=correct_f / n_f if n_f else None,
        acc_pristine=correct_p / n_p if n_p else None,
        confusion=confusion,
        n_total=n,
        unparsed_count=confusion["falsified"]["unparsed"] + confusion["pristine"]["unparsed"],
        metadata=dict(metadata or {}),
    )


def compute_true_vs_ooc(preds: Sequence[PredictionRecord]) -> float:
    """Binary accuracy over a true-vs-out-of-context subset (pristine vs falsified)."""
    if not preds:
        raise EmptyPredictions("no predictions to score")
    return sum(1 for p in preds if p.correct) / len(preds)


# -- inference ---------------------------------------------------------------------


def predict_one(pipeline: Pipeline, entry: Entry) -> PredictionRecord:
    """Run the evidence stages and the judgment prompt for one labeled sample.

    Content failures (no verdict, blank rewrite, missing embeddings) end up on
    the record with ``predicted=None``; endpoint outages propagate.
    """
    s, ev = entry
    start = time.perf_counter()
    trace: list = []
    try:
        _, rewritten, visual = pipeline.evidence_stages(entry, trace)
        visual_item = ev.visual[visual.chosen_index] if visual is not None else None
        request = pipeline.prompts.render_ooc(s.image_ref, s.claim, rewritten, visual_item)
        try:
            raw = pipeline.client.chat(request).text
        except OocError as exc:
            raise SampleFailed(s.id, "judgment", exc) from exc
    except SampleFailed as exc:
        if isinstance(exc.cause, _FATAL):
            raise exc.cause from exc
        elapsed = (time.perf_counter() - start) * 1000
        return PredictionRecord(s.id, s.label, None, "", elapsed, f"{exc.stage}: {exc.cause!r}")
    elapsed = (time.perf_counter() - start) * 1000
    try:
        judgment = parse_judgment(raw)
    except NoVerdict as exc:
        return PredictionRecord(s.id, s.label, None, raw, elapsed, repr(exc))
    return PredictionRecord(s.id, s.label, judgment.predicted_label, raw, elapsed)


def run_inference(
    corpus: Corpus, pipeline: Pipeline, journal_path: str | os.PathLike | None = None
) -> list[PredictionRecord]:
    """Predictions in corpus order. Resumes from ``journal_path`` when given."""
    unlabeled = [e.sample.id for e in corpus if e.sample.label is None]
    if unlabeled:
        raise ValueError(f"{len(unlabeled)} unlabeled samples, e.g. {unlabeled[0]!r}")
    journal = Journal(journal_path, "infer", pipeline.fingerprint()) if journal_path else None
    done: dict[str, PredictionRecord] = {}
    if journal is not None:
        for sid, row in journal.load().items():
            if "prediction" in row:
                done[sid] = PredictionRecord.from_dict(row["prediction"])
        journal.open()
    lock = threading.Lock()

    def work(entry: Entry) -> None:
        rec = predict_one(pipeline, entry)
        with lock:
            done[rec.sample_id] = rec
        if journal is not None:
            journal.append({"sample_id": rec.sample_id, "prediction": rec.to_dict()})

    todo = [e for e in corpus if e.sample.id not in done]
    try:
        _run_pool(work, todo, pipeline.settings.concurrency)
    except _FATAL as exc:
        raise InferenceAborted(len(done), exc) from exc
    return [done[e.sample.id] for e in corpus]


def run_metadata(pipeline: Pipeline, corpus: Corpus) -> dict:
    st = pipeline.settings
    return {
        "model": pipeline.prompts.decoding.model,
        "strategy": st.textual_strategy.value,
        "k": st.k,
        "evidence_composition": "single" if st.k == 1 else "concat-rank-order",
        "visual_strategy": st.visual_strategy.value,
        "template_version": pipeline.prompts.version,
        "seed": st.seed,
        "prng": prng.ALGORITHM,
        "corpus_fingerprint": corpus.fingerprint(),
        "config_fingerprint": pipeline.fingerprint(),
    }


def evaluate_corpus(
    corpus: Corpus, pipeline: Pipeline, journal_path: str | os.PathLike | None = None
) -> tuple[list[PredictionRecord], MetricsReport]:
    preds = run_inference(corpus, pipeline, journal_path)
    return preds, compute_metrics(preds, run_metadata(pipeline, corpus))


# -- experiment matrices -------------------------------------------------------------


@dataclass(frozen=True)
class MatrixSpec:
    """Declarative experiment grid.

    ``strategies`` x ``ks`` cells reproduce the reranking ablation; each entry
    of ``fractions`` adds a cell evaluated on a seeded subsample.
    """

    strategies: tuple[Strategy, ...] = ()
    ks: tuple[int, ...] = ()
    fractions: tuple[float, ...] = ()
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(Strategy.parse(s) for s in self.strategies))
        object.__setattr__(self, "ks", tuple(int(k) for k in self.ks))
        object.__setattr__(self, "fractions", tuple(float(f) for f in self.fractions))

    @classmethod
    def from_dict(cls, d: dict) -> "MatrixSpec":
        ks = d.get("k", d.get("ks", ()))
        return cls(
            tuple(d.get("strategies", ())),
            tuple([ks] if isinstance(ks, int) else ks),
            tuple(d.get("fractions", ())),
            int(d.get("seed", 0)),
            bool(d.get("stratified", True)),
        )

    @classmethod
    def load(cls, path: str | os.PathLike) -> "MatrixSpec":
        return cls.from_dict(yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {})

    def cells(self, base: PipelineSettings) -> list[dict]:
        out: list[dict] = []
        if self.strategies or self.ks:
            for strat, k in itertools.product(self.strategies or (base.textual_strategy,), self.ks or (base.k,)):
                out.append({"strategy": strat.value, "k": k})
        for f in self.fractions:
            out.append({"fraction": f, "seed": self.seed})
        return out


def run_matrix(corpus: Corpus, spec: MatrixSpec, pipeline: Pipeline) -> list[MetricsReport]:
    """One report per cell; a failing cell yields a report with ``error`` set."""
    base = pipeline.settings
    reports = []
    for cell in spec.cells(base):
        settings = base
        cell_corpus = corpus
        if "strategy" in cell:
            settings = replace(base, textual_strategy=Strategy(cell["strategy"]), k=cell["k"])
        try:
            if "fraction" in cell:
                cell_corpus = split_fraction(corpus, cell["fraction"], spec.seed, spec.stratified)
            cell_pipeline = Pipeline(pipeline.client, pipeline.prompts, settings)
            _, report = evaluate_corpus(cell_corpus, cell_pipeline)
            reports.append(replace(report, cell=dict(cell)))
        except OocError as exc:
            log.error("matrix cell %s failed: %s", cell, exc)
            reports.append(MetricsReport(None, None, None, cell=dict(cell), error=repr(exc)))
    return reports


# -- reports -----------------------------------------------------------------------


def percent(value: Optional[float]) -> str:
    """Accuracy as a percentage with one decimal, rounding half up."""
    if value is None:
        return "-"
    # repr gives the shortest decimal that round-trips, avoiding binary artefacts
    pct = Decimal(repr(value)) * 100
    return str(pct.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _cell_label(cell: dict) -> str:
    if not cell:
        return "-"
    return ", ".join(f"{k}={v}" for k, v in cell.items())


def _meta(report: MetricsReport, key: str) -> str:
    value = report.cell.get(key, report.metadata.get(key))
    return "-" if value is None or value == "" else str(value)


def render_report(reports: Sequence[MetricsReport], fmt: str = "markdown") -> str:
    if not reports:
        raise ValueError("nothing to render")
    fmt = fmt.lower()
    if fmt == "json":
        doc = {"schema": REPORT_SCHEMA, "reports": [r.to_dict() for r in reports]}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if fmt not in ("markdown", "md"):
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [
        "| Cell | Model | Strategy | k | N | All | Falsified | Pristine |",
        "|---|---|---|---|---|---|---|---|",
    ]
    for r in reports:
        n = str(r.n_total) if r.error is None else "-"
        row = [
            _cell_label(r.cell),
            _meta(r, "model"),
            _meta(r, "strategy"),
            _meta(r, "k"),
            n,
            percent(r.acc_all),
            percent(r.acc_falsified),
            percent(r.acc_pristine),
        ]
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def load_reports(text: str) -> list[MetricsReport]:
    doc = json.loads(text)
    if doc.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"unsupported report schema {doc.get('schema')!r}")
    return [MetricsReport.from_dict(d) for d in doc["reports"]]


def write_predictions(path: str | os.PathLike, preds: Iterable[PredictionRecord], fingerprint: str) -> None:
    write_jsonl(path, ({**p.to_dict(), "config_fingerprint": fingerprint} for p in preds))
