"""Transition system over BILUO actions, MLP action scorer, greedy decoding
and versioned binary model serialization.

The decoder makes exactly one scorer call per token (linear time). Scoring is
float32 end to end so a saved-and-reloaded model reproduces bit-identical
predictions.
"""

import json
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .encoder import (
    HASH_ALGORITHM,
    BloomTable,
    ContextConfig,
    embed_rows,
    feature_rows,
)
from .errors import FormatError, IntegrityError, ValidationError
from .text import TOKENIZER_VERSION, Token, decode_biluo, tokenize

MODEL_MAGIC = b"TEIGO"
MODEL_FORMAT_VERSION = 1

# state features appended to the context vector: inside flag + clipped distance
N_STATE_FEATURES = 2
_DISTANCE_CLIP = 8


class Action(IntEnum):
    BEGIN = 0
    IN = 1
    LAST = 2
    UNIT = 3
    OUT = 4


ACTION_TO_TAG = {
    Action.BEGIN: "B",
    Action.IN: "I",
    Action.LAST: "L",
    Action.UNIT: "U",
    Action.OUT: "O",
}
TAG_TO_ACTION = {tag: act for act, tag in ACTION_TO_TAG.items()}


@dataclass(frozen=True)
class ParserState:
    position: int = 0
    inside: bool = False
    entity_start: Optional[int] = None
    emitted: Tuple[str, ...] = ()


def valid_actions(state: ParserState, n_tokens: int) -> frozenset:
    if state.position >= n_tokens:
        raise ValidationError(
            f"position {state.position} beyond input of {n_tokens} tokens"
        )
    last = state.position == n_tokens - 1
    if state.inside:
        return frozenset({Action.LAST}) if last else frozenset({Action.IN, Action.LAST})
    if last:
        return frozenset({Action.UNIT, Action.OUT})
    return frozenset({Action.BEGIN, Action.UNIT, Action.OUT})


def step(state: ParserState, action: Action, n_tokens: int) -> ParserState:
    if action not in valid_actions(state, n_tokens):
        raise ValidationError(f"action {action.name} invalid in state {state}")
    tag = ACTION_TO_TAG[action]
    inside = action in (Action.BEGIN, Action.IN)
    entity_start = state.entity_start
    if action == Action.BEGIN:
        entity_start = state.position
    elif action in (Action.LAST, Action.UNIT, Action.OUT):
        entity_start = None
    return ParserState(
        position=state.position + 1,
        inside=inside,
        entity_start=entity_start if inside else None,
        emitted=state.emitted + (tag,),
    )


def state_features(inside: bool, position: int, entity_start: Optional[int]) -> Tuple[float, float]:
    if not inside:
        return 0.0, 0.0
    dist = min(position - entity_start, _DISTANCE_CLIP)
    return 1.0, dist / _DISTANCE_CLIP


def action_mask(inside: bool, is_last: bool) -> np.ndarray:
    mask = np.zeros(5, dtype=bool)
    if inside:
        mask[Action.LAST] = True
        if not is_last:
            mask[Action.IN] = True
    else:
        mask[Action.UNIT] = True
        mask[Action.OUT] = True
        if not is_last:
            mask[Action.BEGIN] = True
    return mask


@dataclass
class MlpScorer:
    """Rectifier MLP scoring the 5 actions; identity on the output layer."""

    weights: List[np.ndarray] = field(repr=False)
    biases: List[np.ndarray] = field(repr=False)
    dropout: float = 0.0

    def __post_init__(self):
        if self.weights[-1].shape[1] != 5:
            raise ValueError("output layer must have 5 units")

    @property
    def input_size(self) -> int:
        return self.weights[0].shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]


@dataclass
class TaggerModel:
    language: str
    tokenizer: dict
    bloom: BloomTable
    context: ContextConfig
    scorer: MlpScorer
    hash_algorithm: str = HASH_ALGORITHM
    seed: int = 0
    meta: dict = field(default_factory=dict)
    format_version: int = MODEL_FORMAT_VERSION

    def tokenize(self, text: str) -> List[Token]:
        if self.tokenizer.get("version") != TOKENIZER_VERSION:
            raise FormatError(
                f"model expects tokenizer version {self.tokenizer.get('version')}, "
                f"this build provides {TOKENIZER_VERSION}"
            )
        return tokenize(text, self.tokenizer.get("extra_punct", ""))


@dataclass(frozen=True)
class PredictedSpan:
    start: int
    end: int
    surface: str


def greedy_decode(model: TaggerModel, tokens: Sequence[Token]) -> List[str]:
    """One left-to-right pass; one scorer invocation per token; invalid
    actions masked to -inf; ties broken by lowest action ordinal. Returns the
    emitted tag sequence (always a valid BILUO sequence)."""
    n = len(tokens)
    if n == 0:
        return []
    bloom = model.bloom
    scorer = model.scorer
    dtype = scorer.weights[0].dtype
    w = model.context.window
    token_width = bloom.token_width

    idx = feature_rows(bloom, tokens)
    vecs = embed_rows(bloom.weights, idx).astype(dtype, copy=False)
    pad = model.context.pad.astype(dtype, copy=False)

    # precompute the context part of the first layer pre-activation in bulk
    w1 = scorer.weights[0]
    b1 = scorer.biases[0]
    ctx_width = token_width * (2 * w + 1)
    if w1.shape[0] != ctx_width + N_STATE_FEATURES:
        raise FormatError("scorer input size does not match context configuration")
    w_state = w1[ctx_width:]
    pre = np.zeros((n, w1.shape[1]), dtype=dtype)
    for slot, off in enumerate(range(-w, w + 1)):
        block = w1[slot * token_width : (slot + 1) * token_width]
        pad_contrib = pad @ block
        pre += pad_contrib
        lo = max(0, -off)
        hi = min(n, n - off)
        if lo < hi:
            pre[lo:hi] += vecs[lo + off : hi + off] @ block - pad_contrib

    tags: List[str] = []
    inside = False
    entity_start: Optional[int] = None
    neg_inf = np.float64(-np.inf)
    for i in range(n):
        sf = np.asarray(
            state_features(inside, i, entity_start), dtype=dtype
        )
        h = np.maximum(pre[i] + sf @ w_state + b1, 0.0)
        for wl, bl in zip(scorer.weights[1:-1], scorer.biases[1:-1]):
            h = np.maximum(h @ wl + bl, 0.0)
        scores = h @ scorer.weights[-1] + scorer.biases[-1]
        scores = np.where(action_mask(inside, i == n - 1), scores, neg_inf)
        action = Action(int(np.argmax(scores)))
        tags.append(ACTION_TO_TAG[action])
        if action == Action.BEGIN:
            inside = True
            entity_start = i
        elif action in (Action.LAST, Action.UNIT, Action.OUT):
            inside = False
            entity_start = None
    return tags


def predict_spans(model: TaggerModel, text: str) -> List[PredictedSpan]:
    """Tag raw text and return predicted character-extent spans."""
    tokens = model.tokenize(text)
    tags = greedy_decode(model, tokens)
    spans = []
    for tspan in decode_biluo(tags):
        start = tokens[tspan.first].start
        end = tokens[tspan.last].end
        spans.append(PredictedSpan(start, end, text[start:end]))
    return spans


# ---------------------------------------------------------------------------
# serialization: magic + version, then five length-prefixed sections
# (header | tokenizer config | embedding table + context | mlp | metadata).
# Little-endian, float32 weights. Byte layout documented in docs/model-format.md.
# ---------------------------------------------------------------------------


def _pack_section(payload: bytes) -> bytes:
    return struct.pack("<I", len(payload)) + payload


def _f32(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f4").tobytes()


def save_model(model: TaggerModel, destination=None) -> bytes:
    header = json.dumps(
        {
            "language": model.language,
            "hash_algorithm": model.hash_algorithm,
            "seed": model.seed,
        },
        sort_keys=True,
    ).encode("utf-8")
    tok = json.dumps(model.tokenizer, sort_keys=True).encode("utf-8")

    bloom = model.bloom
    emb = struct.pack(
        "<IIII", bloom.rows, bloom.dim, bloom.hash_count, model.context.window
    )
    emb += struct.pack(f"<{bloom.hash_count}Q", *bloom.seeds)
    emb += _f32(model.context.pad)
    emb += _f32(bloom.weights)

    scorer = model.scorer
    mlp = struct.pack("<If", len(scorer.weights), scorer.dropout)
    for w, b in zip(scorer.weights, scorer.biases):
        mlp += struct.pack("<II", w.shape[0], w.shape[1])
        mlp += _f32(w) + _f32(b)

    meta = json.dumps(model.meta, sort_keys=True).encode("utf-8")

    blob = MODEL_MAGIC + struct.pack("<I", model.format_version)
    for payload in (header, tok, emb, mlp, meta):
        blob += _pack_section(payload)

    if destination is not None:
        with open(destination, "wb") as fh:
            fh.write(blob)
    return blob


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise IntegrityError(
                f"model file truncated: need {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def section(self) -> bytes:
        (length,) = struct.unpack("<I", self.take(4))
        return self.take(length)


def load_model(data: bytes) -> TaggerModel:
    reader = _Reader(data)
    magic = reader.take(len(MODEL_MAGIC))
    if magic != MODEL_MAGIC:
        raise FormatError(f"bad magic {magic!r}; not a tagger model file")
    (version,) = struct.unpack("<I", reader.take(4))
    if version != MODEL_FORMAT_VERSION:
        raise FormatError(f"unsupported model format version {version}")

    try:
        header = json.loads(reader.section())
        tok = json.loads(reader.section())
    except json.JSONDecodeError as exc:
        raise IntegrityError(f"corrupt JSON section: {exc}") from exc

    emb = reader.section()
    rows, dim, hash_count, window = struct.unpack_from("<IIII", emb, 0)
    off = 16
    seeds = struct.unpack_from(f"<{hash_count}Q", emb, off)
    off += 8 * hash_count
    pad_len = 4 * dim * 4  # four feature kinds, float32
    expected = off + pad_len + rows * dim * 4
    if len(emb) != expected:
        raise IntegrityError(
            f"embedding section has {len(emb)} bytes, expected {expected}"
        )
    pad = np.frombuffer(emb, dtype="<f4", count=4 * dim, offset=off).copy()
    off += pad_len
    weights = (
        np.frombuffer(emb, dtype="<f4", count=rows * dim, offset=off)
        .reshape(rows, dim)
        .copy()
    )

    mlp = _Reader(reader.section())
    n_layers, dropout = struct.unpack("<If", mlp.take(8))
    ws: List[np.ndarray] = []
    bs: List[np.ndarray] = []
    for _ in range(n_layers):
        r, c = struct.unpack("<II", mlp.take(8))
        ws.append(np.frombuffer(mlp.take(r * c * 4), dtype="<f4").reshape(r, c).copy())
        bs.append(np.frombuffer(mlp.take(c * 4), dtype="<f4").copy())
    if mlp.pos != len(mlp.data):
        raise IntegrityError("trailing bytes in mlp section")

    meta = json.loads(reader.section())
    if reader.pos != len(data):
        raise IntegrityError("trailing bytes after final section")

    return TaggerModel(
        language=header["language"],
        tokenizer=tok,
        bloom=BloomTable(rows, dim, hash_count, tuple(seeds), weights),
        context=ContextConfig(window, pad),
        scorer=MlpScorer(ws, bs, float(dropout)),
        hash_algorithm=header["hash_algorithm"],
        seed=header["seed"],
        meta=meta,
        format_version=version,
    )


def load_model_file(path) -> TaggerModel:
    with open(path, "rb") as fh:
        return load_model(fh.read())
