"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]``/``[FAIL]`` line (visible even under
output capture) before asserting, so ``pytest tests/test_acceptance.py``
doubles as the acceptance report.
"""

import random
import signal
import subprocess
import sys
import time
from collections import Counter

import mpmath
import pytest
import yaml

from conftest import check_parser_case, parser_cases, script_for, synthetic_corpus
from oocverify.errors import NoVerdict
from oocverify.evaluate import MatrixSpec, MetricsReport, PredictionRecord, compute_metrics, render_report, run_matrix
from oocverify.ingest import save_manifest, split_fraction
from oocverify.model import Embedding, Label
from oocverify.pipeline import Pipeline, PipelineSettings, emit_training_config, read_training_config
from oocverify.prompts import parse_judgment
from oocverify.similarity import rerank_cosine

F, P = Label.FALSIFIED, Label.PRISTINE


@pytest.fixture
def verdict(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}", flush=True)
        assert ok, detail

    return emit


# 1 -------------------------------------------------------------------------------------


def test_c1_metric_oracle(verdict):
    rng = random.Random(20240601)
    choices = (F, P, None)
    mismatches = 0
    elapsed = 0.0
    total = 0
    for _ in range(1000):
        n = rng.randint(1, 10_000)
        golds = rng.choices((F, P), k=n)
        preds = rng.choices(choices, k=n)
        records = [PredictionRecord(str(i), g, p) for i, (g, p) in enumerate(zip(golds, preds))]
        total += n

        start = time.perf_counter()
        r = compute_metrics(records)
        elapsed += time.perf_counter() - start

        # enumeration over the raw draws, independent of the record objects
        cells = Counter(zip(golds, preds))
        n_f = sum(v for (g, _), v in cells.items() if g is F)
        n_p = n - n_f
        expect = (
            (cells[(F, F)] + cells[(P, P)]) / n,
            cells[(F, F)] / n_f if n_f else None,
            cells[(P, P)] / n_p if n_p else None,
            cells[(F, None)] + cells[(P, None)],
            {"falsified": {"falsified": cells[(F, F)], "pristine": cells[(F, P)], "unparsed": cells[(F, None)]},
             "pristine": {"falsified": cells[(P, F)], "pristine": cells[(P, P)], "unparsed": cells[(P, None)]}},
        )
        got = (r.acc_all, r.acc_falsified, r.acc_pristine, r.unparsed_count, r.confusion)
        mismatches += got != expect
    ok = mismatches == 0 and elapsed < 10.0
    verdict(1, ok, f"1000 sets ({total} predictions), {mismatches} mismatches, compute time {elapsed:.2f}s (< 10s)")


# 2 -------------------------------------------------------------------------------------

mpmath.mp.dps = 40


def hp_cosine(q, v):
    dot = mpmath.fsum(mpmath.mpf(a) * mpmath.mpf(b) for a, b in zip(q, v))
    nq = mpmath.sqrt(mpmath.fsum(mpmath.mpf(a) ** 2 for a in q))
    nv = mpmath.sqrt(mpmath.fsum(mpmath.mpf(b) ** 2 for b in v))
    return dot / (nq * nv)


def test_c2_cosine_oracle(verdict):
    rng = random.Random(7)
    perm_bad = score_bad = scale_bad = 0
    worst = 0.0
    for case in range(500):
        n, dim = rng.randint(1, 64), rng.randint(1, 128)
        items = [[rng.gauss(0, 1) for _ in range(dim)] for _ in range(n)]
        if case % 5 == 0 and n > 1:
            # exact duplicates exercise the index tie-break
            for _ in range(rng.randint(1, n // 2 + 1)):
                items[rng.randrange(n)] = list(items[rng.randrange(n)])
        query = [rng.gauss(0, 1) for _ in range(dim)]

        result = rerank_cosine(Embedding(query), [Embedding(v) for v in items])
        ref = [hp_cosine(query, v) for v in items]
        oracle = sorted(range(n), key=lambda i: -ref[i])  # sorted() is stable
        perm_bad += list(result.order) != oracle
        err = max(abs(mpmath.mpf(s) - ref[i]) for s, i in zip(result.scores, result.order))
        worst = max(worst, float(err))
        score_bad += err > 1e-9

        # one positive scalar per distinct vector keeps exact duplicates exact
        scalars: dict[tuple, float] = {}
        scaled = []
        for v in items:
            c = scalars.setdefault(tuple(v), rng.uniform(1e-3, 1e3))
            scaled.append(Embedding(tuple(c * x for x in v)))
        cq = rng.uniform(1e-3, 1e3)
        q_scaled = Embedding(tuple(cq * x for x in query))
        scale_bad += rerank_cosine(q_scaled, scaled).order != result.order
    ok = perm_bad == 0 and score_bad == 0 and scale_bad == 0
    verdict(
        2, ok,
        f"500 instances: {perm_bad} permutation mismatches, {score_bad} scores off by > 1e-9 "
        f"(worst {worst:.1e}), {scale_bad} scale-invariance failures",
    )


# 3 -------------------------------------------------------------------------------------


def test_c3_end_to_end_mock(verdict, mock_factory, client_factory, tmp_path):
    start = time.perf_counter()
    corpus = synthetic_corpus(20)
    srv = mock_factory(script_for(corpus))
    cache = tmp_path / "cache"

    def run(name):
        pipe = Pipeline(client_factory(srv, cache=cache), settings=PipelineSettings(seed=3))
        before = srv.request_count
        ds = pipe.build_dataset(corpus)
        (tmp_path / name).mkdir()
        paths = ds.save(tmp_path / name / "d.jsonl")
        return ds, paths, srv.request_count - before

    ds1, p1, calls1 = run("cold")
    ds2, p2, calls2 = run("warm")
    ds3, p3, _ = run("warm2")
    elapsed = time.perf_counter() - start

    balanced = ds1.stats == {"falsified": 10, "pristine": 10}
    round_trip = all(parse_judgment(r.assistant_text).predicted_label is r.target_label for r in ds1.records)
    identical = all(p1[k].read_bytes() == p2[k].read_bytes() for k in ("dataset", "rejects", "meta"))
    stages_replay = p2["stages"].read_bytes() == p3["stages"].read_bytes()
    ok = balanced and round_trip and identical and stages_replay and calls1 > 0 and calls2 == 0 and elapsed < 30
    verdict(
        3, ok,
        f"labels {ds1.stats}, self-consistent={round_trip}, byte-identical={identical}, "
        f"warm stages replay={stages_replay}, network calls {calls1} then {calls2}, {elapsed:.1f}s (< 30s)",
    )


# 4 -------------------------------------------------------------------------------------


def _build_cmd(cfg, manifest, out):
    return [sys.executable, "-m", "oocverify", "build-dataset", "--config", str(cfg),
            "--corpus", str(manifest), "--out", str(out)]


def test_c4_resume_after_kill(verdict, mock_factory, tmp_path):
    corpus = synthetic_corpus(20)
    script = script_for(corpus)
    script["delay"] = 0.02
    srv = mock_factory(script)
    manifest = tmp_path / "corpus.jsonl"
    save_manifest(corpus, manifest)

    def config(name):
        path = tmp_path / f"{name}.yaml"
        path.write_text(yaml.safe_dump({"endpoint": srv.url, "cache_dir": str(tmp_path / f"cache-{name}"),
                                        "concurrency": 1, "seed": 9}))
        return path

    full_out = tmp_path / "full.jsonl"
    subprocess.run(_build_cmd(config("full"), manifest, full_out), check=True, capture_output=True)

    out = tmp_path / "resumed.jsonl"
    journal = tmp_path / "resumed.jsonl.journal.jsonl"
    cfg = config("killed")
    proc = subprocess.Popen(_build_cmd(cfg, manifest, out), stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
    done_at_kill = 0
    deadline = time.time() + 60
    while time.time() < deadline and proc.poll() is None:
        if journal.exists():
            done_at_kill = len(journal.read_text().splitlines()) - 1
            if done_at_kill >= 10:
                proc.send_signal(signal.SIGKILL)
                break
        time.sleep(0.005)
    proc.wait(timeout=30)
    killed = proc.returncode == -signal.SIGKILL and not out.exists()

    subprocess.run(_build_cmd(cfg, manifest, out), check=True, capture_output=True)
    identical = out.read_bytes() == full_out.read_bytes()
    verdict(4, killed and identical,
            f"killed after {done_at_kill}/20 samples (SIGKILL={killed}); resumed dataset byte-identical={identical}")


# 5 -------------------------------------------------------------------------------------


def test_c5_rerank_matrix(verdict, mock_factory, client_factory):
    corpus = synthetic_corpus(30)
    srv = mock_factory(script_for(corpus, noise_flips=True))
    pipe = Pipeline(client_factory(srv), settings=PipelineSettings(seed=4))
    spec = MatrixSpec.from_dict({"strategies": ["lvlm", "cosine", "random"], "k": [1, 2, 3]})
    reports = run_matrix(corpus, spec, pipe)
    acc = {(r.cell["strategy"], r.cell["k"]): r.acc_all for r in reports}
    trend = {s: acc[(s, 1)] >= acc[(s, 3)] for s in ("lvlm", "cosine", "random")}
    ok = len(reports) == 9 and all(r.error is None for r in reports) and all(trend.values())
    table = ", ".join(f"{s}: " + "/".join(f"{acc[(s, k)]:.2f}" for k in (1, 2, 3)) for s in trend)
    verdict(5, ok, f"{len(reports)} reports; acc_all at k=1/2/3 -> {table}; k=1 >= k=3 per strategy: {all(trend.values())}")


# 6 -------------------------------------------------------------------------------------


def test_c6_fraction_splits(verdict):
    corpus = synthetic_corpus(200)
    sizes, worst_gap, stable = [], 0, True
    for f in (0.1, 0.25, 0.5, 0.75):
        sub = split_fraction(corpus, f, seed=7)
        counts = sub.label_counts()
        sizes.append(len(sub))
        worst_gap = max(worst_gap, abs(counts.get(F, 0) - counts.get(P, 0)))
        stable &= split_fraction(corpus, f, seed=7) == sub
    ok = sizes == [20, 50, 100, 150] and worst_gap <= 1 and stable
    verdict(6, ok, f"sizes {sizes}, worst label imbalance {worst_gap} (<= 1), deterministic={stable}")


# 7 -------------------------------------------------------------------------------------


def test_c7_training_config(verdict, mock_factory, client_factory, tmp_path):
    corpus = synthetic_corpus(4)
    srv = mock_factory(script_for(corpus))
    ds = Pipeline(client_factory(srv)).build_dataset(corpus)
    emit_training_config(ds, tmp_path / "train.yaml", tmp_path / "d.jsonl")
    cfg = read_training_config(tmp_path / "train.yaml")
    want = {"epochs": 2, "batch_size": 8, "learning_rate": 2e-4, "optimizer": "AdamW",
            "lr_schedule": "linear-warmup+cosine", "adapter": "LoRA"}
    got = {k: cfg.get(k) for k in want}
    verdict(7, got == want, f"emitted {got}")


# 8 -------------------------------------------------------------------------------------


def test_c8_parser_robustness(verdict):
    cases = parser_cases()
    failures = [msg for kind, case in cases if (msg := check_parser_case(kind, case))]

    rng = random.Random(8)
    alphabet = "yesnoYESNO .,!?;:-\n\t0123456789abcdefghijklmnopqrstuvwxyzé\u0085 \U0001f600"
    crashes = no_verdicts = miscounted = 0
    for _ in range(5000):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 60)))
        try:
            parse_judgment(text)
        except NoVerdict:
            no_verdicts += 1
            r = compute_metrics([PredictionRecord("x", rng.choice((F, P)), None, text)])
            miscounted += not (r.acc_all == 0.0 and r.unparsed_count == 1)
        except Exception:
            crashes += 1
    ok = len(cases) == 50 and not failures and crashes == 0 and miscounted == 0 and no_verdicts > 0
    verdict(8, ok, f"fixture {len(cases) - len(failures)}/{len(cases)} pass; 5000 random inputs: "
                   f"{crashes} crashes, {no_verdicts} NoVerdict all scored wrong={miscounted == 0}")


# 9 -------------------------------------------------------------------------------------


def test_c9_report_formatting(verdict):
    table = render_report([MetricsReport(0.899, 0.903, 0.894)], "markdown")
    row = table.splitlines()[2]
    verdict(9, "89.9 | 90.3 | 89.4" in row, f"rendered row: {row}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
