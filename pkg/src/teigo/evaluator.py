"""Strict and relaxed span matching, precision/recall/F1 and the per-sentence
latency benchmark.

Matching is one-to-one and greedy over gold spans in document order: each
gold span takes the first unmatched prediction with equal extents (strict) or
at least one character of overlap (relaxed). Corpus scores are
micro-averaged: counts are summed across documents before computing P/R/F1.
"""

import statistics
import time
from dataclasses import dataclass, asdict
from typing import Dict, List, Sequence, Tuple

from .corpus import Corpus
from .errors import ValidationError
from .tagger import TaggerModel, predict_spans
from .text import split_sentences

EVAL_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class MatchCounts:
    tp: int
    fp: int
    fn: int
    mode: str  # "strict" | "relaxed"

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        if self.mode != other.mode:
            raise ValueError("cannot add counts of different modes")
        return MatchCounts(self.tp + other.tp, self.fp + other.fp,
                           self.fn + other.fn, self.mode)


@dataclass(frozen=True)
class EvalReport:
    strict: Dict[str, float]
    relaxed: Dict[str, float]
    ms_per_sentence: float
    ms_per_sentence_std: float
    n_docs: int
    n_sentences: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = EVAL_SCHEMA_VERSION
        return d


def _check_sorted(spans: Sequence[Tuple[int, int]], label: str):
    prev_end = None
    for start, end in spans:
        if start >= end:
            raise ValidationError(f"{label} span ({start}, {end}) is empty or inverted")
        if prev_end is not None and start < prev_end:
            raise ValidationError(f"{label} spans unsorted or overlapping at ({start}, {end})")
        prev_end = end


def match_spans(gold: Sequence[Tuple[int, int]], pred: Sequence[Tuple[int, int]],
                mode: str) -> MatchCounts:
    """Count one-to-one matches between sorted non-overlapping span lists."""
    if mode not in ("strict", "relaxed"):
        raise ValueError(f"unknown mode {mode!r}")
    _check_sorted(gold, "gold")
    _check_sorted(pred, "predicted")
    used = [False] * len(pred)
    tp = 0
    for gs, ge in gold:
        for j, (ps, pe) in enumerate(pred):
            if used[j]:
                continue
            if mode == "strict":
                hit = (gs, ge) == (ps, pe)
            else:
                hit = ps < ge and gs < pe
            if hit:
                used[j] = True
                tp += 1
                break
    return MatchCounts(tp=tp, fp=len(pred) - tp, fn=len(gold) - tp, mode=mode)


def prf(counts: MatchCounts) -> Dict[str, float]:
    """Precision/recall/F1 with explicit zero conventions: an all-empty
    comparison (no gold, no predictions) scores a perfect 1.0 throughout."""
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    if tp + fp == 0:
        # no predictions: vacuously precise only when nothing was missed
        precision = 1.0 if fn == 0 else 0.0
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        # no gold spans: nothing to miss, recall is vacuously perfect
        recall = 1.0
    else:
        recall = tp / (tp + fn)
    if tp == fp == fn == 0:
        f1 = 1.0
    elif precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return {"precision": precision, "recall": recall, "f1": f1}


def _spans_of(doc) -> List[Tuple[int, int]]:
    return [(s.start, s.end) for s in doc.spans]


def evaluate(model: TaggerModel, corpus: Corpus, repetitions: int = 1) -> EvalReport:
    """Tag every document, micro-average strict and relaxed counts over the
    corpus, and run the latency benchmark on the same corpus."""
    if corpus.language != model.language:
        raise ValidationError(
            f"corpus language {corpus.language!r} does not match model "
            f"language {model.language!r}"
        )
    strict = MatchCounts(0, 0, 0, "strict")
    relaxed = MatchCounts(0, 0, 0, "relaxed")
    for doc in corpus.documents:
        pred = [(s.start, s.end) for s in predict_spans(model, doc.text)]
        gold = _spans_of(doc)
        strict = strict + match_spans(gold, pred, "strict")
        relaxed = relaxed + match_spans(gold, pred, "relaxed")
    mean_ms, std_ms, n_sentences = benchmark(model, corpus, repetitions)
    return EvalReport(
        strict=prf(strict),
        relaxed=prf(relaxed),
        ms_per_sentence=mean_ms,
        ms_per_sentence_std=std_ms,
        n_docs=len(corpus),
        n_sentences=n_sentences,
    )


def benchmark(model: TaggerModel, corpus: Corpus,
              repetitions: int = 3) -> Tuple[float, float, int]:
    """Mean milliseconds per sentence of full text-to-spans tagging
    (tokenization included), after one excluded warm-up pass. Returns
    (mean, stdev, total sentence count). Single-threaded."""
    if repetitions < 1:
        raise ValidationError("repetitions must be >= 1")
    if len(corpus) == 0:
        raise ValidationError("cannot benchmark an empty corpus")
    n_sentences = 0
    tokenized = []
    for doc in corpus.documents:
        tokens = model.tokenize(doc.text)
        n_sentences += len(split_sentences(tokens))
        tokenized.append(doc.text)
    if n_sentences == 0:
        raise ValidationError("corpus contains no sentences")

    for text in tokenized:  # warm-up, excluded from timing
        predict_spans(model, text)

    samples = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        for text in tokenized:
            predict_spans(model, text)
        elapsed_ms = (time.perf_counter() - t0) * 1000.0
        samples.append(elapsed_ms / n_sentences)
    mean = statistics.fmean(samples)
    std = statistics.stdev(samples) if len(samples) > 1 else 0.0
    return mean, std, n_sentences


def render_table(rows: List[dict]) -> str:
    """Render eval reports as aligned rows with F1, F1R and Time columns."""
    header = f"{'corpus':<24} {'F1':>7} {'F1R':>7} {'Time (ms)':>10}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row['name']:<24} {row['strict']['f1']:>7.3f} "
            f"{row['relaxed']['f1']:>7.3f} {row['ms_per_sentence']:>10.2f}"
        )
    return "\n".join(lines)
