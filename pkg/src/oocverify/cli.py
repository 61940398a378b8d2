"""Command-line entry point.

Every subcommand prints one JSON summary line on stdout. Exit codes: 0 on
success, 1 when a run fails (too many rejected samples, endpoint outage, a
failed matrix cell), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .config import RunConfig
from .errors import FailureThresholdExceeded, InferenceAborted, OocError
from .evaluate import (
    MatrixSpec,
    compute_metrics,
    load_reports,
    render_report,
    run_inference,
    run_matrix,
    run_metadata,
    write_predictions,
)
from .ingest import load_manifest, save_manifest, split_fraction
from .mockserver import MockServer
from .pipeline import (
    _run_pool,
    attach_embeddings,
    emit_training_config,
    selection_to_dict,
    write_jsonl,
)

log = logging.getLogger("oocverify")

COMMANDS = ("ingest", "rerank", "rewrite", "build-dataset", "infer", "evaluate", "matrix", "report", "mock-serve")


def _summary(command: str, status: str = "ok", **fields) -> None:
    print(json.dumps({"command": command, "status": status, **fields}, sort_keys=True), flush=True)


def _run_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration (flags override --config)")
    g.add_argument("--config", help="YAML/JSON run configuration file")
    g.add_argument("--endpoint", help="OpenAI-compatible base URL, e.g. http://host:8000/v1")
    g.add_argument("--model")
    g.add_argument("--embedding-model")
    g.add_argument("--timeout", type=float)
    g.add_argument("--max-attempts", type=int)
    g.add_argument("--concurrency", type=int)
    g.add_argument("--cache-dir")
    g.add_argument("--no-cache", action="store_true", help="disable the response cache")
    g.add_argument("--template-dir")
    g.add_argument("--strategy", dest="textual_strategy", choices=["lvlm", "cosine", "random"])
    g.add_argument("--visual-strategy", choices=["cosine", "random"])
    g.add_argument("--k", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--failure-threshold", type=float)
    g.add_argument("--embed-missing", action="store_true", help="fetch absent embeddings from the endpoint")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oocverify", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")

    p = sub.add_parser("ingest", help="validate a manifest, optionally write a subsample")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split")
    p.add_argument("--fraction", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-stratify", action="store_true")
    p.add_argument("--out")

    for name, helptext in (
        ("rerank", "select textual and visual evidence per sample"),
        ("rewrite", "select and rewrite textual evidence per sample"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--corpus", required=True)
        p.add_argument("--out", required=True)
        _run_options(p)

    p = sub.add_parser("build-dataset", help="build the judgment+explanation instruction dataset")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    bal = p.add_mutually_exclusive_group()
    bal.add_argument("--balanced", dest="balanced", action="store_true", default=None)
    bal.add_argument("--unbalanced", dest="balanced", action="store_false")
    p.add_argument("--journal", help="progress journal (default: <out>.journal.jsonl)")
    p.add_argument("--train-config", help="training config path (default: <out>.train.yaml)")
    _run_options(p)

    p = sub.add_parser("infer", help="run OOC detection and write predictions")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--journal")
    _run_options(p)

    p = sub.add_parser("evaluate", help="run inference and score it")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="JSON report path")
    p.add_argument("--markdown", help="also write a Markdown table here")
    p.add_argument("--predictions", help="write predictions here")
    p.add_argument("--journal")
    _run_options(p)

    p = sub.add_parser("matrix", help="run an experiment grid")
    p.add_argument("--corpus", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--markdown")
    _run_options(p)

    p = sub.add_parser("report", help="render saved reports")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=["markdown", "json"], default="markdown")
    p.add_argument("--out")

    p = sub.add_parser("mock-serve", help="serve a scripted mock LVLM endpoint")
    p.add_argument("--script", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config)
    keys = (
        "endpoint", "model", "embedding_model", "timeout", "max_attempts", "concurrency",
        "cache_dir", "template_dir", "textual_strategy", "visual_strategy", "k", "seed",
        "failure_threshold", "balanced",
    )
    cfg = cfg.override(**{k: getattr(args, k) for k in keys if hasattr(args, k)})
    if args.no_cache:
        cfg = replace(cfg, cache_dir=None)
    return cfg


def _corpus(args, pipeline):
    corpus = load_manifest(args.corpus)
    if getattr(args, "embed_missing", False):
        corpus = attach_embeddings(corpus, pipeline.client)
    return corpus


def _cmd_ingest(args) -> int:
    corpus = load_manifest(args.manifest, args.split)
    counts = {("unlabeled" if k is None else k.value): v for k, v in corpus.label_counts().items()}
    out = {}
    if args.fraction is not None:
        corpus = split_fraction(corpus, args.fraction, args.seed, not args.no_stratify)
        out["subsample"] = len(corpus)
    if args.out:
        save_manifest(corpus, args.out)
        out["out"] = args.out
    _summary("ingest", samples=len(corpus), labels=counts, fingerprint=corpus.fingerprint(), **out)
    return 0


def _cmd_select(args, rewrite: bool) -> int:
    cfg = _config(args)
    pipeline = cfg.pipeline()
    corpus = _corpus(args, pipeline)
    fp = pipeline.fingerprint()
    rows: dict[str, dict] = {}
    failed: dict[str, str] = {}

    def work(entry):
        sid = entry.sample.id
        trace: list = []
        try:
            if rewrite:
                sel, rew, vis = pipeline.evidence_stages(entry, trace)
                row = {"sample_id": sid, "selection": selection_to_dict(sel),
                       "rewritten": {"text": rew.text, "origin": rew.origin.value},
                       "visual_selection": selection_to_dict(vis)}
            else:
                sel = pipeline.select_textual(entry, trace=trace)
                vis = pipeline.select_visual(entry, trace)
                row = {"sample_id": sid, "selection": selection_to_dict(sel),
                       "visual_selection": selection_to_dict(vis)}
        except OocError as exc:
            failed[sid] = repr(exc)
            return
        row["config_fingerprint"] = fp
        rows[sid] = row

    _run_pool(work, list(corpus), cfg.concurrency)
    write_jsonl(args.out, (rows[k] for k in sorted(rows)))
    name = "rewrite" if rewrite else "rerank"
    status = "ok" if not failed else "partial"
    _summary(name, status, written=len(rows), failed=len(failed), config_fingerprint=fp)
    total = len(corpus) or 1
    return 1 if len(failed) / total > cfg.failure_threshold else 0


def _cmd_build(args) -> int:
    cfg = _config(args)
    pipeline = cfg.pipeline()
    corpus = _corpus(args, pipeline)
    out = Path(args.out)
    journal = args.journal or str(out) + ".journal.jsonl"
    try:
        dataset = pipeline.build_dataset(corpus, journal_path=journal)
    except FailureThresholdExceeded as exc:
        _summary("build-dataset", "failed", error=str(exc), journal=journal)
        return 1
    paths = dataset.save(out)
    result = {"records": len(dataset), "labels": dataset.stats, "rejected": len(dataset.rejects),
              "config_fingerprint": dataset.config_fingerprint, "out": str(out)}
    if dataset.records:
        train = args.train_config or str(out) + ".train.yaml"
        emit_training_config(dataset, train, out)
        result["train_config"] = train
    _summary("build-dataset", "ok" if not dataset.rejects else "partial", **result,
             sidecars=sorted(str(p) for k, p in paths.items() if k != "dataset"))
    return 0


def _cmd_infer(args, score: bool) -> int:
    cfg = _config(args)
    pipeline = cfg.pipeline()
    corpus = _corpus(args, pipeline)
    name = "evaluate" if score else "infer"
    pred_path = args.out if not score else args.predictions
    journal = args.journal or (str(pred_path or args.out) + ".journal.jsonl")
    try:
        preds = run_inference(corpus, pipeline, journal)
    except InferenceAborted as exc:
        _summary(name, "failed", error=str(exc), journal=journal)
        return 1
    fp = pipeline.fingerprint()
    if pred_path:
        write_predictions(pred_path, preds, fp)
    unparsed = sum(1 for p in preds if p.predicted is None)
    if not score:
        _summary(name, predictions=len(preds), unparsed=unparsed, config_fingerprint=fp, out=args.out)
        return 0
    report = compute_metrics(preds, run_metadata(pipeline, corpus))
    Path(args.out).write_text(render_report([report], "json"), encoding="utf-8")
    if args.markdown:
        Path(args.markdown).write_text(render_report([report], "markdown"), encoding="utf-8")
    _summary(name, acc_all=report.acc_all, acc_falsified=report.acc_falsified,
             acc_pristine=report.acc_pristine, unparsed=unparsed, config_fingerprint=fp, out=args.out)
    return 0


def _cmd_matrix(args) -> int:
    cfg = _config(args)
    pipeline = cfg.pipeline()
    corpus = _corpus(args, pipeline)
    spec = MatrixSpec.load(args.spec)
    reports = run_matrix(corpus, spec, pipeline)
    Path(args.out).write_text(render_report(reports, "json"), encoding="utf-8")
    if args.markdown:
        Path(args.markdown).write_text(render_report(reports, "markdown"), encoding="utf-8")
    failed = [r.cell for r in reports if r.error is not None]
    _summary("matrix", "ok" if not failed else "failed", cells=len(reports), failed=len(failed),
             config_fingerprint=pipeline.fingerprint(), out=args.out)
    return 1 if failed else 0


def _cmd_report(args) -> int:
    reports = load_reports(Path(args.input).read_text(encoding="utf-8"))
    doc = render_report(reports, args.format)
    if args.out:
        Path(args.out).write_text(doc, encoding="utf-8")
        _summary("report", reports=len(reports), out=args.out)
    else:
        sys.stdout.write(doc)
    return 0


def _cmd_mock(args) -> int:
    server = MockServer(args.script, args.host, args.port)
    _summary("mock-serve", "serving", url=server.url)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def _on_sigterm(signum, frame):
    # journals are flushed per line; unwinding through KeyboardInterrupt closes files
    raise KeyboardInterrupt


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        signal.signal(signal.SIGTERM, _on_sigterm)
    except ValueError:
        pass  # not on the main thread

    handlers = {
        "ingest": _cmd_ingest,
        "rerank": lambda a: _cmd_select(a, rewrite=False),
        "rewrite": lambda a: _cmd_select(a, rewrite=True),
        "build-dataset": _cmd_build,
        "infer": lambda a: _cmd_infer(a, score=False),
        "evaluate": lambda a: _cmd_infer(a, score=True),
        "matrix": _cmd_matrix,
        "report": _cmd_report,
        "mock-serve": _cmd_mock,
    }
    try:
        return handlers[args.command](args)
    except KeyboardInterrupt:
        _summary(args.command, "interrupted")
        return 1
    except (OocError, ValueError, OSError) as exc:
        log.error("%s", exc)
        _summary(args.command, "failed", error=str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
