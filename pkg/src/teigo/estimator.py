"""scikit-learn compatible estimator facade over the tagger and trainer.

``TimexIdentifier`` exposes the usual fit/predict/score surface so the
tagger composes with sklearn tooling (clone, get_params, pipelines that
operate on lists of raw texts)."""

from typing import List, Optional, Sequence, Tuple

from sklearn.base import BaseEstimator

from .corpus import Corpus, Document, Part, normalize_spans, partition, split_corpus
from .errors import ValidationError
from .evaluator import MatchCounts, match_spans, prf
from .tagger import predict_spans
from .trainer import HyperConfig, train


def as_documents(X, language: str = "en") -> List[Document]:
    """Coerce fit/score input to Document objects. Accepts Documents,
    (text, [(start, end), ...]) pairs, or dicts with text/spans fields."""
    docs: List[Document] = []
    for i, item in enumerate(X):
        if isinstance(item, Document):
            docs.append(item)
        elif isinstance(item, dict):
            text = item["text"]
            docs.append(Document(
                id=str(item.get("id", i)),
                text=text,
                spans=normalize_spans(text, item.get("spans", [])),
                language=item.get("language", language),
            ))
        elif isinstance(item, tuple) and len(item) == 2:
            text, spans = item
            docs.append(Document(
                id=str(i), text=text, spans=normalize_spans(text, spans),
                language=language,
            ))
        else:
            raise ValidationError(
                f"item {i}: expected Document, dict or (text, spans) pair, "
                f"got {type(item).__name__}"
            )
    return docs


class TimexIdentifier(BaseEstimator):
    """Temporal-expression tagger with a fit/predict interface.

    fit() trains the transition-based tagger on annotated documents,
    holding out a seeded document-level validation slice for early
    stopping. predict() maps raw texts to character-extent span lists.
    """

    def __init__(self, window=2, hidden=128, depth=1, learning_rate=1e-3,
                 batch_size=16, dropout=0.0, rows=4096, hash_count=2, dim=64,
                 seed=0, max_epochs=30, patience=3, validation_split=0.2,
                 language="en"):
        self.window = window
        self.hidden = hidden
        self.depth = depth
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.dropout = dropout
        self.rows = rows
        self.hash_count = hash_count
        self.dim = dim
        self.seed = seed
        self.max_epochs = max_epochs
        self.patience = patience
        self.validation_split = validation_split
        self.language = language

    def _config(self) -> HyperConfig:
        return HyperConfig(
            id=0, window=self.window, hidden=self.hidden, depth=self.depth,
            learning_rate=self.learning_rate, batch_size=self.batch_size,
            dropout=self.dropout, rows=self.rows, hash_count=self.hash_count,
            dim=self.dim, seed=self.seed,
        )

    def fit(self, X, y=None, validation: Optional[Sequence] = None):
        docs = as_documents(X, self.language)
        if validation is not None:
            train_docs = docs
            val_docs = as_documents(validation, self.language)
        else:
            corpus = Corpus("fit", self.language, tuple(docs))
            split = split_corpus(corpus, self.seed)
            val_docs = partition(corpus, split, Part.VALIDATION)
            train_docs = [
                d for d in docs
                if split.assignment[d.id] != Part.VALIDATION
            ]
            if not val_docs:  # too few documents to hold anything out
                val_docs = train_docs
        self.model_, self.report_ = train(
            self._config(), train_docs, val_docs,
            max_epochs=self.max_epochs, patience=self.patience,
        )
        return self

    def predict(self, X) -> List[List[Tuple[int, int]]]:
        self._check_fitted()
        out = []
        for text in X:
            if not isinstance(text, str):
                raise ValidationError("predict expects an iterable of texts")
            out.append([(s.start, s.end) for s in predict_spans(self.model_, text)])
        return out

    def score(self, X, y=None) -> float:
        """Micro-averaged strict F1 against the gold spans carried by X."""
        self._check_fitted()
        docs = as_documents(X, self.language)
        counts = MatchCounts(0, 0, 0, "strict")
        for doc in docs:
            pred = [(s.start, s.end) for s in predict_spans(self.model_, doc.text)]
            gold = [(s.start, s.end) for s in doc.spans]
            counts = counts + match_spans(gold, pred, "strict")
        return prf(counts)["f1"]

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise ValidationError("estimator is not fitted; call fit() first")
