"""Document/corpus data model, TimeML and JSONL I/O, deterministic doc-level
splits, Base/Compilation/All training mixtures, and corpus statistics.

Character offsets are Unicode scalar values, not bytes. Overlapping source
spans are normalized by keeping the longer span (ties: the earlier one) and
logging the drop.
"""

import datetime
import json
import logging
import random
import xml.etree.ElementTree as ET
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

from .errors import FormatError, ParseError, SchemaError, ValidationError
from .text import split_sentences, tokenize

logger = logging.getLogger("teigo.corpus")

JSONL_SCHEMA_VERSION = 1


class Provenance(str, Enum):
    GOLD = "gold"
    WEAK = "weak"


class Domain(str, Enum):
    NEWS = "news"
    NARRATIVE = "narrative"


@dataclass(frozen=True)
class TimexSpan:
    start: int
    end: int  # exclusive
    surface: str


def make_span(text: str, start: int, end: int) -> TimexSpan:
    if not (0 <= start < end <= len(text)):
        raise ValidationError(
            f"span ({start}, {end}) out of bounds for text of length {len(text)}"
        )
    return TimexSpan(start, end, text[start:end])


def normalize_spans(text: str, raw: Iterable[Tuple[int, int]]) -> Tuple[TimexSpan, ...]:
    """Validate bounds, sort, and resolve overlaps longest-wins (ties: the
    earlier span). Dropped spans are logged."""
    spans = [make_span(text, s, e) for s, e in raw]
    ordered = sorted(spans, key=lambda sp: (-(sp.end - sp.start), sp.start))
    kept: List[TimexSpan] = []
    for cand in ordered:
        if any(cand.start < k.end and k.start < cand.end for k in kept):
            logger.warning(
                "dropping span (%d, %d) %r overlapping a longer span",
                cand.start, cand.end, cand.surface,
            )
            continue
        kept.append(cand)
    return tuple(sorted(kept, key=lambda sp: sp.start))


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    spans: Tuple[TimexSpan, ...] = ()
    dct: Optional[datetime.date] = None
    language: str = "en"
    provenance: Provenance = Provenance.GOLD
    domain: Domain = Domain.NEWS

    def __post_init__(self):
        prev_end = 0
        for span in self.spans:
            if not (0 <= span.start < span.end <= len(self.text)):
                raise ValidationError(f"span {span} out of bounds in document {self.id}")
            if span.surface != self.text[span.start : span.end]:
                raise ValidationError(f"span surface mismatch in document {self.id}")
            if span.start < prev_end:
                raise ValidationError(
                    f"spans unsorted or overlapping in document {self.id}"
                )
            prev_end = span.end


@dataclass(frozen=True)
class Corpus:
    name: str
    language: str
    documents: Tuple[Document, ...]

    def __post_init__(self):
        ids = [d.id for d in self.documents]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"duplicate document ids in corpus {self.name}")

    def __len__(self):
        return len(self.documents)


class Part(str, Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


@dataclass(frozen=True)
class SplitAssignment:
    assignment: Dict[str, Part]
    seed: int

    def ids(self, part: Part) -> List[str]:
        return [doc_id for doc_id, p in self.assignment.items() if p == part]


class MixMode(str, Enum):
    BASE = "base"
    COMPILATION = "compilation"
    ALL = "all"


@dataclass(frozen=True)
class MixSpec:
    mode: MixMode
    reference: str
    auxiliary: Tuple[str, ...] = ()
    weak: Tuple[str, ...] = ()


@dataclass(frozen=True)
class CorpusStats:
    n_docs: int
    n_sentences: int
    n_tokens: int
    n_timexs: int


# ---------------------------------------------------------------------------
# TimeML
# ---------------------------------------------------------------------------

_TIMEX_TAG = "TIMEX3"


def _strip_ns(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def read_timeml(xml_text: str, doc_id: str = "doc", language: str = "en",
                domain: Domain = Domain.NEWS) -> Document:
    """Parse a TimeML document: text is the body with markup stripped, spans
    are the character extents of inline TIMEX3 elements. Only the extent and
    functionInDocument="CREATION_TIME" are consumed; nesting of TIMEX3 inside
    TIMEX3 is a schema error."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        line, col = exc.position
        raise ParseError(f"malformed XML: {exc.msg}", line, col) from exc

    parts: List[str] = []
    raw_spans: List[Tuple[int, int]] = []
    dct: List[Optional[datetime.date]] = [None]
    length = [0]

    def emit(chunk: Optional[str]):
        if chunk:
            parts.append(chunk)
            length[0] += len(chunk)

    def walk(elem, inside_timex: bool):
        is_timex = _strip_ns(elem.tag) == _TIMEX_TAG
        if is_timex and inside_timex:
            raise SchemaError(
                f"nested TIMEX3 at character offset {length[0]}"
            )
        start = length[0]
        emit(elem.text)
        for child in elem:
            walk(child, inside_timex or is_timex)
            emit(child.tail)
        if is_timex:
            end = length[0]
            if end > start:
                raw_spans.append((start, end))
            if elem.get("functionInDocument") == "CREATION_TIME":
                dct[0] = _parse_dct(elem.get("value") or "".join(parts)[start:end])

    walk(root, False)
    text = "".join(parts)
    return Document(
        id=doc_id,
        text=text,
        spans=normalize_spans(text, raw_spans),
        dct=dct[0],
        language=language,
        provenance=Provenance.GOLD,
        domain=domain,
    )


def _parse_dct(value: str) -> Optional[datetime.date]:
    value = value.strip()
    if len(value) >= 10:
        try:
            return datetime.date.fromisoformat(value[:10])
        except ValueError:
            pass
    return None


# ---------------------------------------------------------------------------
# JSONL (canonical interchange format)
# ---------------------------------------------------------------------------


def read_jsonl(line: str) -> Document:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON line: {exc}") from exc
    if not isinstance(obj, dict) or "text" not in obj:
        raise FormatError("JSONL object is missing the required 'text' field")
    text = obj["text"]
    spans = []
    for pair in obj.get("spans", []):
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise ValidationError(f"span entry {pair!r} is not a [start, end] pair")
        start, end = pair
        if not (isinstance(start, int) and isinstance(end, int)) or not (
            0 <= start < end <= len(text)
        ):
            raise ValidationError(
                f"span [{start}, {end}] invalid for text of length {len(text)}"
            )
        spans.append((start, end))
    dct = None
    if obj.get("dct"):
        dct = _parse_dct(str(obj["dct"]))
        if dct is None:
            raise ValidationError(f"dct {obj['dct']!r} is not an ISO-8601 date")
    return Document(
        id=str(obj.get("id", "doc")),
        text=text,
        spans=normalize_spans(text, spans),
        dct=dct,
        language=obj.get("language", "en"),
        provenance=Provenance(obj.get("provenance", "gold")),
    )


def write_jsonl(doc: Document) -> str:
    obj = {
        "id": doc.id,
        "text": doc.text,
        "language": doc.language,
        "provenance": doc.provenance.value,
        "spans": [[span.start, span.end] for span in doc.spans],
    }
    if doc.dct is not None:
        obj["dct"] = doc.dct.isoformat()
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def read_corpus_jsonl(path, name: Optional[str] = None,
                      language: Optional[str] = None) -> Corpus:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                docs.append(read_jsonl(line))
            except (FormatError, ValidationError) as exc:
                raise type(exc)(f"{path}:{lineno}: {exc}") from exc
    if name is None:
        import os
        name = os.path.splitext(os.path.basename(str(path)))[0]
    if language is None:
        language = docs[0].language if docs else "en"
    return Corpus(name=name, language=language, documents=tuple(docs))


def write_corpus_jsonl(corpus: Corpus, path):
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            fh.write(write_jsonl(doc) + "\n")


# ---------------------------------------------------------------------------
# splits / mixtures / statistics
# ---------------------------------------------------------------------------


def _round_half_up(x: float) -> int:
    import math
    return int(math.floor(x + 0.5))


def split_corpus(corpus: Corpus, seed: int) -> SplitAssignment:
    """Document-level split: 20% test (rounded half-up), then 20% of the
    remaining development docs for validation. Deterministic for a fixed
    corpus order and seed (seeded Fisher-Yates shuffle, then cut)."""
    if len(corpus) == 0:
        raise ValidationError(f"cannot split empty corpus {corpus.name}")
    ids = [doc.id for doc in corpus.documents]
    random.Random(seed).shuffle(ids)
    n = len(ids)
    n_test = _round_half_up(0.2 * n)
    n_val = _round_half_up(0.2 * (n - n_test))
    assignment: Dict[str, Part] = {}
    for i, doc_id in enumerate(ids):
        if i < n_test:
            assignment[doc_id] = Part.TEST
        elif i < n_test + n_val:
            assignment[doc_id] = Part.VALIDATION
        else:
            assignment[doc_id] = Part.TRAIN
    return SplitAssignment(assignment=assignment, seed=seed)


def partition(corpus: Corpus, split: SplitAssignment, part: Part) -> List[Document]:
    return [doc for doc in corpus.documents if split.assignment[doc.id] == part]


def mix(spec: MixSpec, corpora: Dict[str, Corpus],
        splits: Dict[str, SplitAssignment]) -> Corpus:
    """Concatenate the train partitions of the corpora selected by the mix
    mode; document ids are namespaced by corpus name."""
    if spec.mode == MixMode.BASE:
        names = [spec.reference]
    elif spec.mode == MixMode.COMPILATION:
        names = [spec.reference, *spec.auxiliary]
    else:
        names = [spec.reference, *spec.auxiliary, *spec.weak]
    missing = [n for n in names if n not in corpora or n not in splits]
    if missing:
        raise ValidationError(f"missing corpora or splits: {', '.join(missing)}")
    language = corpora[names[0]].language
    for n in names:
        if corpora[n].language != language:
            raise ValidationError(
                f"language mismatch: {n} is {corpora[n].language}, expected {language}"
            )
    docs = []
    for n in names:
        for doc in partition(corpora[n], splits[n], Part.TRAIN):
            docs.append(replace(doc, id=f"{n}/{doc.id}"))
    return Corpus(name=f"mix-{spec.mode.value}", language=language, documents=tuple(docs))


def stats(corpus: Corpus) -> CorpusStats:
    n_sentences = 0
    n_tokens = 0
    n_timexs = 0
    for doc in corpus.documents:
        tokens = tokenize(doc.text)
        n_tokens += len(tokens)
        n_sentences += len(split_sentences(tokens))
        n_timexs += len(doc.spans)
    return CorpusStats(len(corpus), n_sentences, n_tokens, n_timexs)
