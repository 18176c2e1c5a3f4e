"""Per-token features and hashed (Bloom) embedding lookup.

Each token yields four features (NORM, PREFIX, SUFFIX, SHAPE). A feature is
hashed with a fixed 64-bit algorithm into k row indices of a small embedding
table; the k rows are summed and the four feature vectors concatenated. The
hash algorithm is versioned and recorded in saved models so lookups are
stable across builds and platforms.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from .text import Token

HASH_ALGORITHM = "fnv1a64-splitmix64/1"

FEATURE_KINDS = ("NORM", "PREFIX", "SUFFIX", "SHAPE")

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


@lru_cache(maxsize=200_000)
def feature_code(kind: str, value: str) -> int:
    """Stable 64-bit code of a (kind, value) pair."""
    return fnv1a64(kind.encode("utf-8") + b"\x1f" + value.encode("utf-8"))


class FeatureId(NamedTuple):
    kind: str
    value: str
    code: int


def word_shape(surface: str) -> str:
    """Letters become x/X, digits d; runs longer than 4 are truncated to 4."""
    out: List[str] = []
    run_char = ""
    run_len = 0
    for ch in surface:
        if ch.isdigit():
            mapped = "d"
        elif ch.isalpha():
            mapped = "X" if ch.isupper() else "x"
        else:
            mapped = ch
        if mapped == run_char:
            run_len += 1
            if run_len > 4:
                continue
        else:
            run_char = mapped
            run_len = 1
        out.append(mapped)
    return "".join(out)


def extract_features(token: Token) -> Tuple[FeatureId, FeatureId, FeatureId, FeatureId]:
    surface = token.surface
    values = (
        surface.lower(),
        surface[:1],
        surface[-3:] if len(surface) >= 3 else surface,
        word_shape(surface),
    )
    return tuple(
        FeatureId(kind, value, feature_code(kind, value))
        for kind, value in zip(FEATURE_KINDS, values)
    )


@dataclass
class BloomTable:
    """Hashed embedding table: rows x dim weights, k seeded hashes per feature."""

    rows: int
    dim: int
    hash_count: int
    seeds: Tuple[int, ...]
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.rows <= 0 or self.dim <= 0 or self.hash_count <= 0:
            raise ValueError("rows, dim and hash_count must be positive")
        if len(self.seeds) != self.hash_count:
            raise ValueError("need exactly hash_count seeds")
        if len(set(self.seeds)) != self.hash_count:
            raise ValueError("seeds must be distinct")
        if self.weights.shape != (self.rows, self.dim):
            raise ValueError("weights shape must be (rows, dim)")

    @classmethod
    def create(cls, rng: np.random.Generator, rows: int, dim: int,
               hash_count: int, scale: float = 0.1,
               dtype=np.float64) -> "BloomTable":
        seeds: List[int] = []
        while len(seeds) < hash_count:
            s = int(rng.integers(1, 1 << 63))
            if s not in seeds:
                seeds.append(s)
        weights = rng.uniform(-scale, scale, size=(rows, dim)).astype(dtype)
        return cls(rows, dim, hash_count, tuple(seeds), weights)

    def row_indices(self, code: int) -> List[int]:
        return [splitmix64((code ^ s) & _MASK64) % self.rows for s in self.seeds]

    @property
    def token_width(self) -> int:
        return 4 * self.dim


def feature_rows(table: BloomTable, tokens: Sequence[Token]) -> np.ndarray:
    """Row-index array of shape (n_tokens, 4, hash_count)."""
    out = np.empty((len(tokens), 4, table.hash_count), dtype=np.int64)
    for i, token in enumerate(tokens):
        for j, feat in enumerate(extract_features(token)):
            out[i, j] = table.row_indices(feat.code)
    return out


def embed_rows(weights: np.ndarray, rows_idx: np.ndarray) -> np.ndarray:
    """Sum the k rows per feature and concatenate the four feature vectors:
    (n, 4, k) indices -> (n, 4*dim) matrix."""
    n = rows_idx.shape[0]
    return weights[rows_idx].sum(axis=2).reshape(n, 4 * weights.shape[1])


def embed_token(table: BloomTable, features: Sequence[FeatureId]) -> np.ndarray:
    """Embedding of a single token: concatenation of its four feature vectors."""
    parts = []
    for feat in features:
        rows = table.row_indices(feat.code)
        parts.append(table.weights[rows].sum(axis=0))
    return np.concatenate(parts)


@dataclass
class ContextConfig:
    """Symmetric token window with a learned boundary (pad) vector."""

    window: int
    pad: np.ndarray = field(repr=False)

    def width(self, token_width: int) -> int:
        return (2 * self.window + 1) * token_width


def encode_context(token_vectors: np.ndarray, cfg: ContextConfig, i: int) -> np.ndarray:
    n = token_vectors.shape[0]
    if not 0 <= i < n:
        raise IndexError(f"position {i} out of range for {n} tokens")
    parts = []
    for off in range(-cfg.window, cfg.window + 1):
        j = i + off
        parts.append(token_vectors[j] if 0 <= j < n else cfg.pad)
    return np.concatenate(parts)


def context_matrix(token_vectors: np.ndarray, cfg: ContextConfig) -> np.ndarray:
    """All context vectors at once: (n, (2w+1)*token_width)."""
    n, width = token_vectors.shape
    w = cfg.window
    padded = np.vstack([np.tile(cfg.pad, (w, 1)), token_vectors, np.tile(cfg.pad, (w, 1))])
    cols = [padded[off : off + n] for off in range(2 * w + 1)]
    return np.hstack(cols)
