"""Static-oracle action supervision, minibatch SGD with momentum, early
stopping on validation strict F1, and the fixed 26-configuration grid search.

Training is teacher-forced: state features and action masks come from the
gold tag trajectory, so the loss at a token never depends on model
predictions at earlier tokens. A single run is single-threaded and fully
determined by its configuration seed.
"""

import os
import time
from dataclasses import dataclass, field, asdict
from importlib import resources
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import Document
from .encoder import BloomTable, ContextConfig
from .errors import TrainingError, ValidationError
from .evaluator import MatchCounts, match_spans, prf
from .tagger import (
    Action,
    MlpScorer,
    TAG_TO_ACTION,
    TaggerModel,
    action_mask,
    predict_spans,
    state_features,
)
from .text import (
    TOKENIZER_VERSION,
    align_spans,
    encode_biluo,
    split_sentences,
    tokenize,
)

GRID_SCHEMA_VERSION = 1
MAX_EPOCHS = 30
PATIENCE = 3
MOMENTUM = 0.9
GRAD_CLIP = 5.0


@dataclass(frozen=True)
class HyperConfig:
    id: int
    window: int
    hidden: int
    depth: int
    learning_rate: float
    batch_size: int  # in sentences
    dropout: float
    rows: int
    hash_count: int
    dim: int
    seed: int


def load_grid() -> List[HyperConfig]:
    """The fixed, versioned set of 26 training configurations."""
    text = resources.files("teigo").joinpath("data/grid26").read_text()
    configs: List[HyperConfig] = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        (cid, window, hidden, depth, lr, batch, dropout,
         rows, hash_count, dim, seed) = line.split("\t")
        configs.append(HyperConfig(
            id=int(cid), window=int(window), hidden=int(hidden),
            depth=int(depth), learning_rate=float(lr), batch_size=int(batch),
            dropout=float(dropout), rows=int(rows),
            hash_count=int(hash_count), dim=int(dim), seed=int(seed),
        ))
    if len(configs) != 26 or len({c.id for c in configs}) != 26:
        raise TrainingError("grid26 data file must define 26 unique configurations")
    return configs


@dataclass
class TrainReport:
    epochs: List[dict] = field(default_factory=list)  # {epoch, loss, val_f1}
    best_epoch: int = 0
    stop_reason: str = ""  # "patience" | "max_epochs"
    wall_time_s: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = GRID_SCHEMA_VERSION
        return d


def oracle_actions(tags: Sequence[str]) -> List[Action]:
    """Gold BILUO tags mapped positionally onto parser actions."""
    from .text import decode_biluo
    decode_biluo(tags)  # validity check
    return [TAG_TO_ACTION[t] for t in tags]


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------


@dataclass
class _PreparedDoc:
    idx: np.ndarray          # (n, 4, k) bloom row indices
    actions: np.ndarray      # (n,) gold action ids
    state: np.ndarray        # (n, 2) gold-trajectory state features
    masks: np.ndarray        # (n, 5) valid-action masks along the gold path
    sentences: List[Tuple[int, int]]
    n: int


def _prepare(doc: Document, table: BloomTable) -> Optional[_PreparedDoc]:
    from .encoder import feature_rows

    tokens = tokenize(doc.text)
    n = len(tokens)
    if n == 0:
        return None
    idx = feature_rows(table, tokens)
    tspans = align_spans([(s.start, s.end) for s in doc.spans], tokens)
    tags = encode_biluo(tspans, n)
    actions = np.array([TAG_TO_ACTION[t] for t in tags], dtype=np.int64)
    state = np.zeros((n, 2))
    masks = np.zeros((n, 5), dtype=bool)
    entity_start = None
    for i, tag in enumerate(tags):
        inside = tag in ("I", "L")
        state[i] = state_features(inside, i, entity_start)
        masks[i] = action_mask(inside, i == n - 1)
        if tag == "B":
            entity_start = i
        elif tag in ("L", "U", "O"):
            entity_start = None
    sentences = [(s.first_token, s.last_token) for s in split_sentences(tokens)]
    return _PreparedDoc(idx, actions, state, masks, sentences, n)


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


def _param_keys(depth: int) -> List[str]:
    keys = ["bloom", "pad"]
    for layer in range(depth + 1):
        keys += [f"W{layer}", f"b{layer}"]
    return keys


def _init_params(config: HyperConfig, rng: np.random.Generator) -> Tuple[dict, Tuple[int, ...]]:
    table = BloomTable.create(rng, config.rows, config.dim, config.hash_count, scale=0.1)
    token_width = 4 * config.dim
    ctx_width = (2 * config.window + 1) * token_width
    params = {
        "bloom": table.weights,
        "pad": rng.uniform(-0.1, 0.1, size=token_width),
    }
    sizes = [ctx_width + 2] + [config.hidden] * config.depth + [5]
    for layer in range(len(sizes) - 1):
        fan_in, fan_out = sizes[layer], sizes[layer + 1]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        params[f"W{layer}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[f"b{layer}"] = np.zeros(fan_out)
    return params, table.seeds


def build_model(params: dict, config: HyperConfig, seeds: Tuple[int, ...],
                language: str, meta: Optional[dict] = None) -> TaggerModel:
    """Freeze float64 training parameters into a float32 inference model."""
    depth = config.depth
    weights = [params[f"W{l}"].astype(np.float32) for l in range(depth + 1)]
    biases = [params[f"b{l}"].astype(np.float32) for l in range(depth + 1)]
    return TaggerModel(
        language=language,
        tokenizer={"version": TOKENIZER_VERSION, "extra_punct": ""},
        bloom=BloomTable(config.rows, config.dim, config.hash_count, tuple(seeds),
                         params["bloom"].astype(np.float32)),
        context=ContextConfig(config.window, params["pad"].astype(np.float32)),
        scorer=MlpScorer(weights, biases, config.dropout),
        seed=config.seed,
        meta=meta or {},
    )


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------


def forward_backward(params: dict, batch: Sequence[Tuple[_PreparedDoc, Tuple[int, int]]],
                     window: int, dim: int, depth: int, dropout: float = 0.0,
                     rng: Optional[np.random.Generator] = None):
    """Masked cross-entropy loss and analytic gradients for a batch of
    sentences. Returns (loss, grads, n_tokens)."""
    token_width = 4 * dim
    slots = 2 * window + 1
    ctx_width = slots * token_width

    ctx_rows: List[np.ndarray] = []
    sf_rows: List[np.ndarray] = []
    y_rows: List[np.ndarray] = []
    mask_rows: List[np.ndarray] = []
    book = []  # (doc, lo, hi, gather, m, L)
    for doc, (first, last) in batch:
        lo = max(0, first - window)
        hi = min(doc.n, last + window + 1)
        m = hi - lo
        v_loc = params["bloom"][doc.idx[lo:hi]].sum(axis=2).reshape(m, token_width)
        v_ext = np.vstack([v_loc, params["pad"][None, :]])
        length = last - first + 1
        gather = np.empty((length, slots), dtype=np.int64)
        for r, p in enumerate(range(first, last + 1)):
            for s_i, off in enumerate(range(-window, window + 1)):
                pos = p + off
                gather[r, s_i] = pos - lo if 0 <= pos < doc.n else m
        ctx_rows.append(v_ext[gather].reshape(length, ctx_width))
        sf_rows.append(doc.state[first : last + 1])
        y_rows.append(doc.actions[first : last + 1])
        mask_rows.append(doc.masks[first : last + 1])
        book.append((doc, lo, hi, gather, m, length))

    x = np.hstack([np.vstack(ctx_rows), np.vstack(sf_rows)])
    y = np.concatenate(y_rows)
    valid = np.vstack(mask_rows)
    n_tokens = x.shape[0]

    # forward
    acts = [x]
    dmasks = []
    h = x
    for layer in range(depth):
        z = h @ params[f"W{layer}"] + params[f"b{layer}"]
        h = np.maximum(z, 0.0)
        if dropout > 0.0 and rng is not None:
            keep = rng.random(h.shape) >= dropout
            h = h * keep / (1.0 - dropout)
            dmasks.append(keep)
        else:
            dmasks.append(None)
        acts.append(h)
    scores = h @ params[f"W{depth}"] + params[f"b{depth}"]
    masked = np.where(valid, scores, -1e30)
    mx = masked.max(axis=1, keepdims=True)
    lse = mx + np.log(np.exp(masked - mx).sum(axis=1, keepdims=True))
    logp = masked - lse
    loss = -logp[np.arange(n_tokens), y].mean()

    # backward
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    dscores = np.exp(logp)
    dscores[np.arange(n_tokens), y] -= 1.0
    dscores /= n_tokens
    dscores[~valid] = 0.0
    grads[f"W{depth}"] = acts[-1].T @ dscores
    grads[f"b{depth}"] = dscores.sum(axis=0)
    dh = dscores @ params[f"W{depth}"].T
    for layer in range(depth - 1, -1, -1):
        if dmasks[layer] is not None:
            dh = dh * dmasks[layer] / (1.0 - dropout)
        dz = dh * (acts[layer + 1] > 0.0)
        grads[f"W{layer}"] = acts[layer].T @ dz
        grads[f"b{layer}"] = dz.sum(axis=0)
        dh = dz @ params[f"W{layer}"].T

    dx_ctx = dh[:, :ctx_width]
    offset = 0
    for doc, lo, hi, gather, m, length in book:
        dxc = dx_ctx[offset : offset + length].reshape(length, slots, token_width)
        offset += length
        dv_ext = np.zeros((m + 1, token_width))
        np.add.at(dv_ext, gather, dxc)
        grads["pad"] += dv_ext[m]
        dv = dv_ext[:m].reshape(m, 4, 1, dim)
        idx = doc.idx[lo:hi]  # (m, 4, k)
        k = idx.shape[2]
        contrib = np.broadcast_to(dv, (m, 4, k, dim)).reshape(-1, dim)
        np.add.at(grads["bloom"], idx.reshape(-1), contrib)
    return loss, grads, n_tokens


def _clip_and_step(params, grads, velocity, lr):
    total = 0.0
    for g in grads.values():
        total += float((g * g).sum())
    norm = np.sqrt(total)
    scale = GRAD_CLIP / norm if norm > GRAD_CLIP else 1.0
    for key in params:
        velocity[key] = MOMENTUM * velocity[key] + grads[key] * scale
        params[key] -= lr * velocity[key]


def validation_strict_f1(model: TaggerModel, docs: Sequence[Document]) -> float:
    counts = MatchCounts(0, 0, 0, "strict")
    for doc in docs:
        pred = [(s.start, s.end) for s in predict_spans(model, doc.text)]
        gold = [(s.start, s.end) for s in doc.spans]
        counts = counts + match_spans(gold, pred, "strict")
    return prf(counts)["f1"]


def train(config: HyperConfig, train_docs: Sequence[Document],
          val_docs: Sequence[Document], *, max_epochs: int = MAX_EPOCHS,
          patience: int = PATIENCE,
          val_scorer: Optional[Callable[[int], float]] = None,
          meta: Optional[dict] = None) -> Tuple[TaggerModel, TrainReport]:
    """Train one configuration with teacher forcing, early stopping after
    `patience` epochs without validation improvement, and return the weight
    snapshot from the best epoch. `val_scorer`, when given, replaces the
    validation evaluation (used to exercise the stopping protocol)."""
    if not train_docs:
        raise TrainingError("training set is empty")
    if not val_docs:
        raise TrainingError("validation set is empty")
    languages = {d.language for d in list(train_docs) + list(val_docs)}
    if len(languages) != 1:
        raise ValidationError(f"mixed languages in training data: {sorted(languages)}")
    language = languages.pop()

    t0 = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    params, seeds = _init_params(config, rng)
    table = BloomTable(config.rows, config.dim, config.hash_count, seeds, params["bloom"])
    prepared = [p for p in (_prepare(d, table) for d in train_docs) if p is not None]
    sent_refs = [(doc, sent) for doc in prepared for sent in doc.sentences]
    if not sent_refs:
        raise TrainingError("training set contains no sentences")

    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    report = TrainReport()
    best_f1 = -1.0
    best_snapshot = None
    for epoch in range(1, max_epochs + 1):
        perm = rng.permutation(len(sent_refs))
        loss_sum = 0.0
        token_sum = 0
        for start in range(0, len(perm), config.batch_size):
            batch = [sent_refs[i] for i in perm[start : start + config.batch_size]]
            loss, grads, n_tok = forward_backward(
                params, batch, config.window, config.dim, config.depth,
                dropout=config.dropout, rng=rng,
            )
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch starting {start} "
                    f"(lr={config.learning_rate}, config id {config.id})"
                )
            _clip_and_step(params, grads, velocity, config.learning_rate)
            loss_sum += loss * n_tok
            token_sum += n_tok

        if val_scorer is not None:
            val_f1 = float(val_scorer(epoch))
        else:
            snapshot_model = build_model(params, config, seeds, language, meta)
            val_f1 = validation_strict_f1(snapshot_model, val_docs)
        report.epochs.append(
            {"epoch": epoch, "loss": loss_sum / token_sum, "val_f1": val_f1}
        )
        if val_f1 > best_f1:
            best_f1 = val_f1
            report.best_epoch = epoch
            best_snapshot = {k: v.copy() for k, v in params.items()}
        if epoch - report.best_epoch >= patience:
            report.stop_reason = "patience"
            break
    else:
        report.stop_reason = "max_epochs"

    report.wall_time_s = time.perf_counter() - t0
    final = best_snapshot if best_snapshot is not None else params
    model_meta = dict(meta or {})
    model_meta.setdefault("config_id", config.id)
    model = build_model(final, config, seeds, language, model_meta)
    return model, report


# ---------------------------------------------------------------------------
# grid search
# ---------------------------------------------------------------------------


@dataclass
class GridResult:
    best_id: int
    best_model: TaggerModel
    reports: Dict[int, TrainReport]
    failures: Dict[int, str]
    leaderboard: List[dict]


def _run_config(config, train_docs, val_docs, meta):
    return config.id, train(config, train_docs, val_docs, meta=meta)


def grid_search(train_docs: Sequence[Document], val_docs: Sequence[Document],
                configs: Optional[Sequence[HyperConfig]] = None,
                max_workers: Optional[int] = None,
                val_scorer: Optional[Callable[[HyperConfig, int], float]] = None,
                meta: Optional[dict] = None) -> GridResult:
    """Train every grid configuration and keep the model with the highest
    validation strict F1 (ties: lowest config id). Individual failures are
    recorded; only all-26-failing is fatal. Results are order-independent
    because every run is seeded by its own configuration."""
    if configs is None:
        configs = load_grid()
    if max_workers is None:
        max_workers = int(os.environ.get("TEIGO_THREADS", "1"))

    outcomes: Dict[int, Tuple[TaggerModel, TrainReport]] = {}
    failures: Dict[int, str] = {}
    if max_workers > 1 and val_scorer is None:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            futures = {
                pool.submit(_run_config, c, list(train_docs), list(val_docs), meta): c
                for c in configs
            }
            for future, config in futures.items():
                try:
                    cid, result = future.result()
                    outcomes[cid] = result
                except Exception as exc:  # recorded, not fatal
                    failures[config.id] = str(exc)
    else:
        for config in configs:
            try:
                if val_scorer is not None:
                    scorer = (lambda c: (lambda epoch: val_scorer(c, epoch)))(config)
                    outcomes[config.id] = train(
                        config, train_docs, val_docs, val_scorer=scorer, meta=meta
                    )
                else:
                    outcomes[config.id] = train(config, train_docs, val_docs, meta=meta)
            except Exception as exc:
                failures[config.id] = str(exc)

    if not outcomes:
        raise TrainingError("all grid configurations failed")

    leaderboard = []
    for config in configs:
        if config.id in outcomes:
            report = outcomes[config.id][1]
            best = report.epochs[report.best_epoch - 1]["val_f1"]
            leaderboard.append(
                {"id": config.id, "best_val_f1": best, "best_epoch": report.best_epoch}
            )
        else:
            leaderboard.append({"id": config.id, "error": failures[config.id]})

    scored = [row for row in leaderboard if "best_val_f1" in row]
    best_row = max(scored, key=lambda r: (r["best_val_f1"], -r["id"]))
    best_id = best_row["id"]
    return GridResult(
        best_id=best_id,
        best_model=outcomes[best_id][0],
        reports={cid: rep for cid, (_, rep) in outcomes.items()},
        failures=failures,
        leaderboard=leaderboard,
    )
