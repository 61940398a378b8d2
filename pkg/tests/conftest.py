from __future__ import annotations

import os
from pathlib import Path

import pytest
import yaml

from oocverify import errors
from oocverify.client import LvlmClient, RetryPolicy
from oocverify.ingest import Corpus
from oocverify.mockserver import MockServer
from oocverify.model import Embedding, Entry, EvidenceImage, EvidenceSet, EvidenceText, Label, Sample

GOLDEN = Path(__file__).parent / "golden"
FIXTURES = Path(__file__).parent / "fixtures"

RERANK_MARK = "Reply with the number of the most relevant snippet"
REWRITE_MARK = "Rewrite this text"
CAPTION_MARK = "No text about this image"
EXPLAIN_MARK = "Fact-checkers have established"
OOC_MARK = "Candidate answers"


def golden(name: str, actual: str) -> str:
    """Golden text for ``name``; UPDATE_GOLDEN=1 rewrites it from ``actual``."""
    path = GOLDEN / name
    if os.environ.get("UPDATE_GOLDEN") == "1":
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(actual, encoding="utf-8")
    return path.read_text(encoding="utf-8")


def parser_cases() -> list[tuple[str, dict]]:
    data = yaml.safe_load((FIXTURES / "parser_cases.yaml").read_text(encoding="utf-8"))
    return [("judgment", c) for c in data["judgment"]] + [("rerank", c) for c in data["rerank"]]


def check_parser_case(kind: str, case: dict) -> str | None:
    """None when the parser output matches the hand label, else a description."""
    from oocverify.prompts import parse_judgment, parse_rerank_response

    text = case["text"]
    if kind == "judgment":
        try:
            j = parse_judgment(text)
        except errors.NoVerdict:
            return None if case["verdict"] is None else f"{text!r}: unexpected NoVerdict"
        got = (j.verdict.value, j.explanation)
        want = (case["verdict"], case.get("explanation"))
        return None if got == want else f"{text!r}: got {got}, want {want}"
    try:
        idx = parse_rerank_response(text, case["n"])
    except (errors.Unparseable, errors.OutOfRange) as exc:
        name = type(exc).__name__
        return None if case.get("error") == name else f"{text!r}: unexpected {name}"
    if case.get("error"):
        return f"{text!r}: got index {idx}, want {case['error']}"
    return None if idx == case["index"] else f"{text!r}: got {idx}, want {case['index']}"


def tag(i: int) -> str:
    return f"{i:03d}"


def synthetic_entry(i: int, label: Label, relevant_pos: int = 0, n_evidence: int = 3) -> Entry:
    """Sample whose textual evidence holds one relevant item among fillers.

    The relevant item has the highest cosine to the image embedding; fillers
    are tagged IRRELEVANT so scripted mocks can react to them.
    """
    t = tag(i)
    texts = []
    embs = []
    for j in range(n_evidence):
        if j == relevant_pos:
            texts.append(f"Report R{t}: the photo was taken at event E{t} in city C{t}.")
            embs.append((1.0, 0.1, 0.0, 0.0))
        else:
            texts.append(f"IRRELEVANT filler {j} for {t}: celebrity gossip and adverts.")
            embs.append((0.0, 1.0, 0.2 * j, 0.5))
    textual = tuple(EvidenceText(x, f"https://news.example/{t}/{j}", Embedding(e)) for j, (x, e) in enumerate(zip(texts, embs)))
    visual = (
        EvidenceImage(f"https://img.example/vis-{t}-a.jpg", Embedding((0.0, 1.0, 0.0))),
        EvidenceImage(f"https://img.example/vis-{t}-b.jpg", Embedding((1.0, 0.0, 0.0))),
    )
    sample = Sample(
        id=f"s{t}",
        image_ref=f"https://img.example/s{t}.jpg",
        claim=f"Claim number {t} about event E{t}.",
        label=label,
        image_embedding=Embedding((1.0, 0.0, 0.0, 0.0)),
        claim_embedding=Embedding((0.9, 0.1, 0.0)),
    )
    return Entry(sample, EvidenceSet(textual, visual))


def synthetic_corpus(n: int, n_falsified: int | None = None, n_evidence: int = 3) -> Corpus:
    n_falsified = n // 2 if n_falsified is None else n_falsified
    entries = []
    for i in range(n):
        label = Label.FALSIFIED if i < n_falsified else Label.PRISTINE
        entries.append(synthetic_entry(i, label, relevant_pos=(i * 7) % n_evidence, n_evidence=n_evidence))
    # interleave labels so ordering is not trivially grouped
    entries.sort(key=lambda e: (int(e.sample.id[1:]) * 7919) % 1009)
    return Corpus(tuple(entries), "custom")


def script_for(corpus: Corpus, noise_flips: bool = True) -> dict:
    """Mock script answering every prompt type for a synthetic corpus.

    Rewrites of evidence containing a filler item are marked NOISE; with
    ``noise_flips`` the judgment for a NOISE rewrite is the wrong verdict.
    """
    rules = []
    for s, ev in corpus:
        t = s.id[1:]
        rel = next((j for j, x in enumerate(ev.textual) if x.text.startswith("Report")), None)
        if rel is not None:
            rules.append({"match": [RERANK_MARK, f"Report R{t}"], "reply": str(rel + 1)})
        rules.append({"match": [REWRITE_MARK, f"IRRELEVANT", f"for {t}:"], "reply": f"Background {t}: NOISE mixed with gossip."})
        rules.append({"match": [REWRITE_MARK, f"Report R{t}"], "reply": f"Background {t}: event E{t} in city C{t}."})
        rules.append({"match": [CAPTION_MARK, f"s{t}.jpg"], "reply": f"Background {t}: a crowd in a city square."})
        rules.append({"match": [EXPLAIN_MARK, f"Claim number {t}"], "reply": f"The background for {t} settles it."})
        right = "No" if s.label is Label.FALSIFIED else "Yes"
        wrong = "Yes" if right == "No" else "No"
        if noise_flips:
            rules.append({"match": [OOC_MARK, f"Claim number {t}", "NOISE"], "reply": f"{wrong}. The background for {t} misleads."})
        rules.append({"match": [OOC_MARK, f"Claim number {t}"], "reply": f"{right}. The background for {t} settles it."})
    return {"chat": rules}


@pytest.fixture
def mock_factory():
    servers = []

    def make(script: dict) -> MockServer:
        srv = MockServer(script).start()
        servers.append(srv)
        return srv

    yield make
    for srv in servers:
        srv.stop()


@pytest.fixture
def client_factory(tmp_path):
    clients = []

    def make(server: MockServer, cache: bool | str | Path = True, **kw) -> LvlmClient:
        cache_dir = None
        if cache is True:
            cache_dir = tmp_path / "cache"
        elif cache:
            cache_dir = cache
        kw.setdefault("policy", RetryPolicy(max_attempts=3, base_delay=0.001, max_delay=0.01))
        c = LvlmClient(server.url, "mock-lvlm", cache=cache_dir, timeout=10, **kw)
        clients.append(c)
        return c

    yield make
    for c in clients:
        c.close()
