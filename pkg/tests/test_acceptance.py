"""Acceptance suite: ten end-to-end criteria, each printing one pass line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines.
"""

import random
import time

import numpy as np

from synthdata import news_stream, template_corpus
from teigo.errors import FormatError, IntegrityError
from teigo.evaluator import match_spans, prf
from teigo.tagger import greedy_decode, load_model, predict_spans, save_model
from teigo.teacher import build_weak_corpus, load_rules
from teigo.text import TokenSpan, decode_biluo, encode_biluo
from teigo.trainer import (
    HyperConfig,
    _init_params,
    _prepare,
    forward_backward,
    grid_search,
    load_grid,
    train,
    validation_strict_f1,
)

from test_evaluator import brute_force_tp, random_instance
from test_tagger import random_model, random_text


def report(n, ok, detail=""):
    tail = f" ({detail})" if detail else ""
    print(f"acceptance {n}: {'PASS' if ok else 'FAIL'}{tail}")
    assert ok


def test_01_biluo_round_trip():
    rng = random.Random(0)
    t0 = time.perf_counter()
    failures = 0
    for _ in range(1000):
        n = rng.randrange(1, 201)
        spans = []
        cursor = 0
        while cursor < n:
            if rng.random() < 0.4:
                last = rng.randrange(cursor, min(n, cursor + 6))
                spans.append(TokenSpan(cursor, last))
                cursor = last + 2
            else:
                cursor += 1
        if decode_biluo(encode_biluo(spans, n)) != spans:
            failures += 1
    elapsed = time.perf_counter() - t0
    report(1, failures == 0 and elapsed < 5.0,
           f"1000 round trips, {elapsed:.2f}s")


def test_02_decoder_validity_fuzz():
    rng = random.Random(1)
    errors = 0
    runs = 0
    for seed in range(100):
        model = random_model(seed, window=rng.randrange(0, 3),
                             hidden=rng.choice([4, 8, 16]))
        for _ in range(10):
            tokens = model.tokenize(random_text(rng, rng.randrange(1, 60)))
            tags = greedy_decode(model, tokens)
            runs += 1
            try:
                decode_biluo(tags)
            except Exception:
                errors += 1
    report(2, errors == 0, f"{runs} model x input runs")


def test_03_metric_oracle():
    gold = [(0, 5), (10, 20)]
    pred = [(0, 5), (12, 18), (30, 35)]
    strict_f1 = prf(match_spans(gold, pred, "strict"))["f1"]
    relaxed_f1 = prf(match_spans(gold, pred, "relaxed"))["f1"]
    worked = abs(strict_f1 - 0.4) < 1e-12 and abs(relaxed_f1 - 0.8) < 1e-12

    rng = random.Random(3)
    deficit = 0
    for _ in range(500):
        g, p = random_instance(rng)
        for mode in ("strict", "relaxed"):
            greedy_tp = match_spans(g, p, mode).tp
            exact_tp = brute_force_tp(g, p, mode)
            # spans are disjoint within each list, so equality is required
            if greedy_tp != exact_tp:
                deficit += 1
    report(3, worked and deficit == 0,
           f"worked example F1 {strict_f1:.2f}/{relaxed_f1:.2f}, 500 instances, "
           f"deficit {deficit}")


def test_04_gradient_check():
    config = HyperConfig(id=0, window=1, hidden=6, depth=2, learning_rate=1e-2,
                         batch_size=4, dropout=0.0, rows=16, hash_count=2,
                         dim=4, seed=42)
    rng = np.random.default_rng(config.seed)
    params, seeds = _init_params(config, rng)
    from teigo.encoder import BloomTable
    table = BloomTable(config.rows, config.dim, config.hash_count, seeds,
                       params["bloom"])
    from teigo.corpus import Document, normalize_spans
    text = "in 2023 today"
    doc = _prepare(Document(id="g", text=text,
                            spans=normalize_spans(text, [(3, 7), (8, 13)])),
                   table)
    batch = [(doc, doc.sentences[0])]
    _, grads, _ = forward_backward(params, batch, config.window, config.dim,
                                   config.depth)
    eps = 1e-4
    worst = 0.0
    for key, arr in params.items():
        flat = arr.reshape(-1)
        analytic = grads[key].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            plus, _, _ = forward_backward(params, batch, config.window,
                                          config.dim, config.depth)
            flat[i] = orig - eps
            minus, _, _ = forward_backward(params, batch, config.window,
                                           config.dim, config.depth)
            flat[i] = orig
            fd = (plus - minus) / (2 * eps)
            rel = abs(fd - analytic[i]) / max(abs(fd), abs(analytic[i]), 1e-8)
            worst = max(worst, rel)
    report(4, worst <= 1e-3, f"worst relative error {worst:.2e}")


def test_05_memorization_convergence():
    docs = template_corpus(200)
    train_docs, held_out = docs[:160], docs[160:]
    config = load_grid()[0]
    t0 = time.perf_counter()
    model, rep = train(config, train_docs, held_out)
    elapsed = time.perf_counter() - t0
    train_f1 = validation_strict_f1(model, train_docs)
    held_f1 = validation_strict_f1(model, held_out)
    report(5, train_f1 >= 0.95 and held_f1 >= 0.85 and elapsed < 600,
           f"config {config.id}: train F1 {train_f1:.3f}, held-out {held_f1:.3f}, "
           f"{elapsed:.0f}s, {len(rep.epochs)} epochs")


def test_06_distillation_analogue():
    rules = load_rules("en")
    t0 = time.perf_counter()
    weak, _ = build_weak_corpus(news_stream(6000), rules)
    docs = list(weak.documents)[:5500]
    train_docs, val_docs, held_out = docs[:4600], docs[4600:5000], docs[5000:]
    config = next(c for c in load_grid()
                  if (c.window, c.hidden, c.depth, c.learning_rate) ==
                  (2, 64, 1, 1e-2))
    model, _ = train(config, train_docs, val_docs)
    held_f1 = validation_strict_f1(model, held_out)
    elapsed = time.perf_counter() - t0
    report(6, held_f1 >= 0.90 and elapsed < 1800,
           f"held-out strict F1 vs teacher {held_f1:.3f}, {elapsed:.0f}s, "
           f"{len(train_docs)} training docs")


def test_07_latency_and_linearity():
    model = random_model(0, window=2, hidden=128, rows=4096, dim=64)
    words = ["on", "May", "2023", "the", "report", "today", "in", "1999",
             "meeting", "Friday", "at", "noon", "said", "officials", "it",
             "was", "done", "by", "then", "."]
    sentence = " ".join(words)
    assert len(model.tokenize(sentence)) == 20
    predict_spans(model, sentence)  # warm-up
    t0 = time.perf_counter()
    reps = 50
    for _ in range(reps):
        predict_spans(model, sentence)
    per_sentence_ms = (time.perf_counter() - t0) * 1000.0 / reps

    n = 10_000
    doc_n = " ".join(words[i % len(words)] for i in range(n))
    doc_2n = " ".join(words[i % len(words)] for i in range(2 * n))
    predict_spans(model, doc_n)  # warm-up

    def best_of_3(text):
        times = []
        for _ in range(3):
            t0 = time.perf_counter()
            predict_spans(model, text)
            times.append(time.perf_counter() - t0)
        return min(times)

    ratio = best_of_3(doc_2n) / best_of_3(doc_n)
    report(7, per_sentence_ms <= 10.0 and ratio <= 2.5,
           f"{per_sentence_ms:.2f} ms per 20-token sentence, "
           f"t(2N)/t(N) = {ratio:.2f} at N={n}")


def test_08_protocol_conformance():
    docs = template_corpus(8)
    config = HyperConfig(id=1, window=1, hidden=8, depth=1, learning_rate=1e-2,
                         batch_size=4, dropout=0.0, rows=128, hash_count=2,
                         dim=8, seed=5)
    plateau = {e: min(e, 4) / 10 for e in range(1, 31)}
    _, rep = train(config, docs[:6], docs[6:],
                   val_scorer=lambda epoch: plateau[epoch])
    stop_ok = (rep.stop_reason == "patience" and rep.best_epoch == 4
               and len(rep.epochs) == rep.best_epoch + 3)

    scores = {cid: 0.5 for cid in range(1, 27)}
    scores[11] = 0.9
    scores[13] = 0.9
    result = grid_search(docs[:6], docs[6:], configs=load_grid(),
                         val_scorer=lambda c, e: scores[c.id])
    grid_ok = len(result.leaderboard) == 26 and result.best_id == 11
    report(8, stop_ok and grid_ok,
           f"stopped at epoch {len(rep.epochs)} (best {rep.best_epoch}), "
           f"grid best id {result.best_id} of {len(result.leaderboard)}")


def test_09_filter_conformance():
    from test_teacher import ten_doc_stream
    _, rep = build_weak_corpus(ten_doc_stream(), load_rules("en"))
    got = rep.to_dict()
    expected = {"kept": 4, "rejected_non_utf8": 0, "rejected_bad_dct": 1,
                "rejected_html": 2, "rejected_zero_timex": 3, "total": 10}
    report(9, got == expected, f"report {got}")


def test_10_serialization():
    model = random_model(11, window=2, hidden=16, dim=8)
    blob = save_model(model)
    restored = load_model(blob)
    rng = random.Random(5)
    mismatches = 0
    for _ in range(100):
        text = random_text(rng, rng.randrange(1, 30))
        if predict_spans(model, text) != predict_spans(restored, text):
            mismatches += 1
    try:
        load_model(b"XXXX" + blob[4:])
        magic_rejected = False
    except FormatError:
        magic_rejected = True
    try:
        load_model(blob[: len(blob) // 2])
        truncation_rejected = False
    except IntegrityError:
        truncation_rejected = True
    report(10, mismatches == 0 and magic_rejected and truncation_rejected,
           f"{mismatches} mismatches over 100 sentences")
