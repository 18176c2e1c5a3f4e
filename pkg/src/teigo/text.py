"""Tokenization, sentence splitting, span alignment and the BILUO scheme.

All functions here are pure and deterministic: the tokenizer is rule-based
(whitespace split, then leading/trailing punctuation peeled into their own
tokens) so the same text always produces the same tokens on any platform.
"""

import logging
import re
import unicodedata
from typing import List, NamedTuple, Sequence, Tuple

from .errors import ValidationError

logger = logging.getLogger("teigo.text")

TOKENIZER_VERSION = 1

TAG_B = "B"
TAG_I = "I"
TAG_L = "L"
TAG_U = "U"
TAG_O = "O"
BILUO_TAGS = (TAG_B, TAG_I, TAG_L, TAG_U, TAG_O)


class Token(NamedTuple):
    surface: str
    start: int
    end: int
    index: int


class Sentence(NamedTuple):
    first_token: int
    last_token: int  # inclusive


class TokenSpan(NamedTuple):
    first: int
    last: int  # inclusive


_WS = re.compile(r"\S+")
_TERMINALS = {".", "!", "?"}


def _is_punct(ch: str, extra: str = "") -> bool:
    if ch in extra:
        return True
    cat = unicodedata.category(ch)
    return cat.startswith("P") or cat.startswith("S")


def tokenize(text: str, extra_punct: str = "") -> List[Token]:
    """Split on whitespace, then peel leading/trailing punctuation characters
    into separate single-character tokens. Digit/letter mixes stay whole."""
    tokens: List[Token] = []
    for m in _WS.finditer(text):
        chunk = m.group()
        base = m.start()
        s, e = 0, len(chunk)
        left = []
        right = []
        while s < e and _is_punct(chunk[s], extra_punct):
            left.append((s, s + 1))
            s += 1
        while e > s and _is_punct(chunk[e - 1], extra_punct):
            right.append((e - 1, e))
            e -= 1
        pieces = left + ([(s, e)] if e > s else []) + list(reversed(right))
        for a, b in pieces:
            tokens.append(Token(chunk[a:b], base + a, base + b, len(tokens)))
    return tokens


def split_sentences(tokens: Sequence[Token]) -> List[Sentence]:
    """Sentence boundary after '.', '!' or '?' unless the next token starts
    with a lowercase letter. A trailing partial sentence is closed at the end."""
    sentences: List[Sentence] = []
    start = 0
    n = len(tokens)
    for i, tok in enumerate(tokens):
        if tok.surface in _TERMINALS:
            nxt = tokens[i + 1].surface if i + 1 < n else None
            if nxt is None or not nxt[:1].islower():
                sentences.append(Sentence(start, i))
                start = i + 1
    if start < n:
        sentences.append(Sentence(start, n - 1))
    return sentences


def align_spans(
    char_spans: Sequence[Tuple[int, int]], tokens: Sequence[Token]
) -> List[TokenSpan]:
    """Map character spans to the minimal token range covering every token
    they overlap. Spans overlapping no token are dropped with a warning;
    overlaps after snapping are resolved longest-span-wins (ties: earlier)."""
    candidates: List[TokenSpan] = []
    for start, end in char_spans:
        covered = [
            t.index for t in tokens if t.start < end and t.end > start
        ]
        if not covered:
            logger.warning("span (%d, %d) overlaps no token; dropped", start, end)
            continue
        candidates.append(TokenSpan(covered[0], covered[-1]))
    # longest wins; ties broken by earlier start
    ordered = sorted(candidates, key=lambda s: (-(s.last - s.first), s.first))
    kept: List[TokenSpan] = []
    for cand in ordered:
        if any(cand.first <= k.last and k.first <= cand.last for k in kept):
            logger.warning("token span %s overlaps a longer span; dropped", (cand,))
            continue
        kept.append(cand)
    return sorted(kept)


def encode_biluo(token_spans: Sequence[TokenSpan], n_tokens: int) -> List[str]:
    """Single-token span -> U; multi-token -> B I... L; everything else O."""
    tags = [TAG_O] * n_tokens
    seen = [False] * n_tokens
    for span in token_spans:
        first, last = span
        if not (0 <= first <= last < n_tokens):
            raise ValidationError(f"token span {span} out of bounds for {n_tokens} tokens")
        if any(seen[first : last + 1]):
            raise ValidationError(f"token span {span} overlaps another span")
        for i in range(first, last + 1):
            seen[i] = True
        if first == last:
            tags[first] = TAG_U
        else:
            tags[first] = TAG_B
            for i in range(first + 1, last):
                tags[i] = TAG_I
            tags[last] = TAG_L
    return tags


def decode_biluo(tags: Sequence[str]) -> List[TokenSpan]:
    """Inverse of encode_biluo. Raises ValidationError naming the first
    offending index on an invalid sequence."""
    spans: List[TokenSpan] = []
    open_start = None
    for i, tag in enumerate(tags):
        if tag not in BILUO_TAGS:
            raise ValidationError(f"unknown tag {tag!r} at index {i}")
        if open_start is None:
            if tag == TAG_B:
                open_start = i
            elif tag == TAG_U:
                spans.append(TokenSpan(i, i))
            elif tag in (TAG_I, TAG_L):
                raise ValidationError(f"{tag} without open entity at index {i}")
        else:
            if tag == TAG_I:
                continue
            if tag == TAG_L:
                spans.append(TokenSpan(open_start, i))
                open_start = None
            else:
                raise ValidationError(f"unclosed entity before {tag} at index {i}")
    if open_start is not None:
        raise ValidationError(f"entity opened at index {open_start} never closed")
    return spans
