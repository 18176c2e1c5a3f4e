"""teigo: fast temporal-expression identification.

Library surface: a rule-based tokenizer and BILUO codec (text), hashed
embeddings (encoder), a linear-time transition-based tagger (tagger), a
teacher-forced trainer with a fixed 26-configuration grid (trainer), a
rule-based weak annotator and corpus pipeline (teacher), strict/relaxed F1
plus latency evaluation (evaluator), and an sklearn-style estimator facade
(estimator). The ``teigo`` CLI binds everything for batch use.
"""

from .corpus import (
    Corpus,
    CorpusStats,
    Document,
    MixMode,
    MixSpec,
    Part,
    Provenance,
    SplitAssignment,
    TimexSpan,
    mix,
    read_jsonl,
    read_timeml,
    split_corpus,
    stats,
    write_jsonl,
)
from .estimator import TimexIdentifier
from .evaluator import EvalReport, MatchCounts, evaluate, match_spans, prf
from .tagger import TaggerModel, load_model, predict_spans, save_model
from .teacher import FilterReport, RawDocument, annotate, build_weak_corpus, load_rules
from .trainer import HyperConfig, TrainReport, grid_search, load_grid, train

__version__ = "0.1.0"

__all__ = [
    "Corpus", "CorpusStats", "Document", "MixMode", "MixSpec", "Part",
    "Provenance", "SplitAssignment", "TimexSpan", "mix", "read_jsonl",
    "read_timeml", "split_corpus", "stats", "write_jsonl",
    "TimexIdentifier",
    "EvalReport", "MatchCounts", "evaluate", "match_spans", "prf",
    "TaggerModel", "load_model", "predict_spans", "save_model",
    "FilterReport", "RawDocument", "annotate", "build_weak_corpus", "load_rules",
    "HyperConfig", "TrainReport", "grid_search", "load_grid", "train",
    "__version__",
]
