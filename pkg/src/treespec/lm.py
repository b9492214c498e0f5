"""Language-model abstraction and the two deterministic toy backends.

A model maps a (possibly masked) token context to a next-token
distribution.  Masking is resolved once, in :meth:`LanguageModel.next_distribution`:
backends only ever see the visible subsequence, so scoring with a mask row is
identical to scoring the linearized branch that row selects.

Distributions are plain ``float64`` numpy vectors.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FORMAT_NAME = "treespec.model"
FORMAT_VERSION = 1

_SUM_TOL = 1e-9


def check_distribution(probs: np.ndarray) -> np.ndarray:
    """Raise ``ValueError`` unless ``probs`` is a valid probability vector."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise ValueError("distribution must be a non-empty 1-d vector")
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise ValueError("distribution has negative or non-finite entries")
    if abs(probs.sum() - 1.0) > _SUM_TOL:
        raise ValueError(f"distribution sums to {probs.sum()!r}, not 1")
    return probs


def argmax_token(probs: np.ndarray) -> int:
    """Index of the most probable token; ties go to the lowest id."""
    # np.argmax already returns the first maximal index.
    return int(np.argmax(probs))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


@dataclass(frozen=True)
class MaskedContext:
    """Token context plus the mask row for the next prediction.

    ``mask=None`` means every position is visible.
    """

    tokens: tuple[int, ...]
    mask: tuple[bool, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        if self.mask is not None:
            mask = tuple(bool(m) for m in self.mask)
            if len(mask) != len(self.tokens):
                raise ValueError(
                    f"mask row has {len(mask)} entries for {len(self.tokens)} tokens"
                )
            if self.tokens and not any(mask):
                raise ValueError("mask row must expose at least one position")
            object.__setattr__(self, "mask", mask)

    def visible(self) -> tuple[int, ...]:
        if self.mask is None:
            return self.tokens
        return tuple(t for t, m in zip(self.tokens, self.mask) if m)


@dataclass
class CallLedger:
    """Counts model-parameter visits (passes) and scored rows per role."""

    passes: Counter = field(default_factory=Counter)
    rows: Counter = field(default_factory=Counter)

    def record(self, role: str, n_rows: int = 1) -> None:
        self.passes[role] += 1
        self.rows[role] += n_rows

    def as_dict(self) -> dict:
        return {"passes": dict(sorted(self.passes.items())),
                "rows": dict(sorted(self.rows.items()))}


class LanguageModel:
    """Base class: subclasses implement :meth:`score` on visible tokens."""

    vocab_size: int
    eos_id: int
    vocab: tuple[str, ...]

    def _init_vocab(self, vocab_size: int, eos_id: int, vocab: Sequence[str] | None):
        if vocab_size < 2:
            raise ValueError("vocab_size must be at least 2")
        if not 0 <= eos_id < vocab_size:
            raise ValueError(f"eos_id {eos_id} outside vocabulary of size {vocab_size}")
        self.vocab_size = int(vocab_size)
        self.eos_id = int(eos_id)
        if vocab is None:
            vocab = [str(i) for i in range(vocab_size)]
        if len(vocab) != vocab_size:
            raise ValueError("vocab labels must match vocab_size")
        self.vocab = tuple(str(v) for v in vocab)

    def score(self, visible: tuple[int, ...]) -> np.ndarray:
        raise NotImplementedError

    def check_tokens(self, tokens: Iterable[int]) -> None:
        for t in tokens:
            if not 0 <= t < self.vocab_size:
                raise ValueError(f"token id {t} outside vocabulary of size {self.vocab_size}")

    def next_distribution(self, ctx: MaskedContext) -> np.ndarray:
        self.check_tokens(ctx.tokens)
        return self.score(ctx.visible())

    def same_vocabulary(self, other: "LanguageModel") -> bool:
        return (self.vocab_size == other.vocab_size and self.eos_id == other.eos_id)


def next_distribution(model: LanguageModel, ctx: MaskedContext,
                      ledger: CallLedger | None = None, role: str = "draft") -> np.ndarray:
    probs = model.next_distribution(ctx)
    if ledger is not None:
        ledger.record(role, 1)
    return probs


def batched_distributions(model: LanguageModel, rows: Sequence[MaskedContext],
                          ledger: CallLedger | None = None,
                          role: str = "target") -> list[np.ndarray]:
    """Score every row in one model pass.

    Rows are scored one by one so each result is bit-identical to
    :func:`next_distribution`; the ledger is charged a single pass.
    """
    if len(rows) == 0:
        raise ValueError("batched_distributions needs at least one row")
    out = [model.next_distribution(r) for r in rows]
    if ledger is not None:
        ledger.record(role, len(rows))
    return out


class NGramModel(LanguageModel):
    """Back-off n-gram table over token ids.

    ``order`` is the number of preceding tokens used as the lookup key.  When
    the full key is absent the longest stored suffix is used, ending at the
    empty context and finally at the uniform distribution.  Every stored row
    is mixed with ``smoothing`` mass of the uniform distribution.
    """

    def __init__(self, order: int, vocab_size: int, table: dict, eos_id: int,
                 smoothing: float = 0.0, vocab: Sequence[str] | None = None):
        if order < 1:
            raise ValueError("order must be >= 1")
        if not 0.0 <= smoothing <= 1.0:
            raise ValueError("smoothing must lie in [0, 1]")
        self._init_vocab(vocab_size, eos_id, vocab)
        self.order = int(order)
        self.smoothing = float(smoothing)
        uniform = np.full(self.vocab_size, 1.0 / self.vocab_size)
        self._uniform = _frozen(uniform)
        raw = {}
        effective = {}
        for key, probs in table.items():
            key = tuple(int(t) for t in key)
            if len(key) > self.order:
                raise ValueError(f"context {key} longer than order {self.order}")
            self.check_tokens(key)
            probs = check_distribution(probs)
            if probs.size != self.vocab_size:
                raise ValueError(f"row for {key} has {probs.size} entries")
            raw[key] = _frozen(probs)
            effective[key] = _frozen((1.0 - self.smoothing) * probs + self.smoothing * uniform)
        self.table = raw
        self._effective = effective

    def score(self, visible):
        k = min(self.order, len(visible))
        while k >= 0:
            key = tuple(visible[len(visible) - k:]) if k else ()
            row = self._effective.get(key)
            if row is not None:
                return row
            k -= 1
        return self._uniform

    @classmethod
    def fit(cls, sequences: Iterable[Sequence[int]], order: int, vocab_size: int,
            eos_id: int, smoothing: float = 0.01,
            vocab: Sequence[str] | None = None) -> "NGramModel":
        """Maximum-likelihood counts for every context length 0..order.

        Each training sequence is terminated with ``eos_id``.
        """
        counts: dict[tuple, np.ndarray] = {}
        n_seq = 0
        for seq in sequences:
            seq = [int(t) for t in seq] + [eos_id]
            n_seq += 1
            for i, tok in enumerate(seq):
                if not 0 <= tok < vocab_size:
                    raise ValueError(f"token id {tok} outside vocabulary of size {vocab_size}")
                for k in range(0, min(order, i) + 1):
                    key = tuple(seq[i - k:i])
                    row = counts.get(key)
                    if row is None:
                        row = counts[key] = np.zeros(vocab_size)
                    row[tok] += 1.0
        if n_seq == 0:
            raise ValueError("cannot fit an n-gram model on an empty corpus")
        table = {key: row / row.sum() for key, row in counts.items()}
        return cls(order, vocab_size, table, eos_id, smoothing=smoothing, vocab=vocab)

    @classmethod
    def random(cls, vocab_size: int, order: int = 2, seed: int = 0,
               sharpness: float = 2.5, eos_id: int | None = None,
               smoothing: float = 0.01, eos_bias: float = 0.0) -> "NGramModel":
        """Random table with a row for every context of length <= order."""
        rng = np.random.default_rng(seed)
        eos_id = vocab_size - 1 if eos_id is None else eos_id
        table = {}
        keys: list[tuple] = [()]
        frontier = [()]
        for _ in range(order):
            frontier = [k + (t,) for k in frontier for t in range(vocab_size)]
            keys.extend(frontier)
        for key in keys:
            logits = sharpness * rng.standard_normal(vocab_size)
            logits[eos_id] += eos_bias
            table[key] = _softmax(logits)
        return cls(order, vocab_size, table, eos_id, smoothing=smoothing)

    def _payload(self) -> dict:
        rows = [{"context": list(k), "probs": [float(p) for p in v]}
                for k, v in sorted(self.table.items(), key=lambda kv: (len(kv[0]), kv[0]))]
        return {"order": self.order, "smoothing": self.smoothing, "table": rows}

    def __eq__(self, other):
        if not isinstance(other, NGramModel):
            return NotImplemented
        return (self.order == other.order and self.smoothing == other.smoothing
                and self.vocab == other.vocab and self.eos_id == other.eos_id
                and self.table.keys() == other.table.keys()
                and all(np.array_equal(self.table[k], other.table[k]) for k in self.table))

    __hash__ = None


class LinearSoftmaxModel(LanguageModel):
    """Averaged-embedding bag model with a softmax readout.

    The context vector is a recency-weighted average of the embeddings of the
    last ``context_window`` visible tokens (weight ``decay**age``); logits are
    ``h @ output + bias``.
    """

    def __init__(self, embedding: np.ndarray, output: np.ndarray, bias: np.ndarray,
                 context_window: int, eos_id: int, decay: float = 0.7,
                 vocab: Sequence[str] | None = None, seed: int | None = None):
        embedding = np.asarray(embedding, dtype=np.float64)
        output = np.asarray(output, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        vocab_size = embedding.shape[0]
        if output.shape != (embedding.shape[1], vocab_size) or bias.shape != (vocab_size,):
            raise ValueError("weight shapes do not agree")
        if context_window < 1:
            raise ValueError("context_window must be >= 1")
        if not 0.0 < decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")
        self._init_vocab(vocab_size, eos_id, vocab)
        self.embedding = _frozen(embedding)
        self.output = _frozen(output)
        self.bias = _frozen(bias)
        self.context_window = int(context_window)
        self.decay = float(decay)
        self.seed = seed

    @classmethod
    def random(cls, vocab_size: int, dim: int = 8, context_window: int = 4,
               seed: int = 0, scale: float = 2.0, eos_id: int | None = None,
               decay: float = 0.7) -> "LinearSoftmaxModel":
        rng = np.random.default_rng(seed)
        emb = rng.standard_normal((vocab_size, dim))
        out = scale * rng.standard_normal((dim, vocab_size)) / np.sqrt(dim)
        bias = 0.5 * rng.standard_normal(vocab_size)
        eos_id = vocab_size - 1 if eos_id is None else eos_id
        return cls(emb, out, bias, context_window, eos_id, decay=decay, seed=seed)

    def score(self, visible):
        window = visible[-self.context_window:] if visible else ()
        if window:
            ages = np.arange(len(window) - 1, -1, -1, dtype=np.float64)
            w = self.decay ** ages
            h = (w[:, None] * self.embedding[list(window)]).sum(axis=0) / w.sum()
            logits = h @ self.output + self.bias
        else:
            logits = self.bias.copy()
        return _softmax(logits)

    def _payload(self) -> dict:
        return {"context_window": self.context_window, "decay": self.decay,
                "seed": self.seed,
                "embedding": self.embedding.tolist(), "output": self.output.tolist(),
                "bias": self.bias.tolist()}

    def __eq__(self, other):
        if not isinstance(other, LinearSoftmaxModel):
            return NotImplemented
        return (self.context_window == other.context_window and self.decay == other.decay
                and self.vocab == other.vocab and self.eos_id == other.eos_id
                and np.array_equal(self.embedding, other.embedding)
                and np.array_equal(self.output, other.output)
                and np.array_equal(self.bias, other.bias))

    __hash__ = None


def perturbed_copy(target: LanguageModel, noise: float, seed: int = 0) -> LanguageModel:
    """Derive a draft model that agrees with ``target`` less often as noise grows.

    n-gram rows become ``(1 - noise) * p + noise * q`` for a random row ``q``;
    linear models mix their readout weights the same way.  ``noise=0`` gives
    an exact copy.
    """
    if not 0.0 <= noise <= 1.0:
        raise ValueError("noise must lie in [0, 1]")
    # separate stream, so seed k never replays the draws of a random(seed=k) target
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    if isinstance(target, NGramModel):
        table = {}
        for key in sorted(target.table, key=lambda k: (len(k), k)):
            p = target.table[key]
            q = _softmax(2.5 * rng.standard_normal(target.vocab_size))
            table[key] = (1.0 - noise) * p + noise * q if noise else p
        return NGramModel(target.order, target.vocab_size, table, target.eos_id,
                          smoothing=target.smoothing, vocab=target.vocab)
    if isinstance(target, LinearSoftmaxModel):
        out = target.output
        bias = target.bias
        if noise:
            scale = out.std() if out.size else 1.0
            out = (1.0 - noise) * out + noise * scale * rng.standard_normal(out.shape)
            bias = (1.0 - noise) * bias + noise * 0.5 * rng.standard_normal(bias.shape)
        return LinearSoftmaxModel(target.embedding, out, bias, target.context_window,
                                  target.eos_id, decay=target.decay, vocab=target.vocab)
    raise TypeError(f"cannot perturb {type(target).__name__}")


# -- serialization -----------------------------------------------------------

def model_to_dict(model: LanguageModel) -> dict:
    kind = {NGramModel: "ngram", LinearSoftmaxModel: "linear_softmax"}.get(type(model))
    if kind is None:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return {"format": FORMAT_NAME, "version": FORMAT_VERSION, "kind": kind,
            "vocab_size": model.vocab_size, "eos_id": model.eos_id,
            "vocab": list(model.vocab), "model": model._payload()}


def model_from_dict(doc: dict) -> LanguageModel:
    if doc.get("format") != FORMAT_NAME:
        raise ValueError("not a treespec model document")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')!r}")
    body = doc["model"]
    if doc["kind"] == "ngram":
        table = {tuple(r["context"]): np.array(r["probs"], dtype=np.float64)
                 for r in body["table"]}
        return NGramModel(body["order"], doc["vocab_size"], table, doc["eos_id"],
                          smoothing=body["smoothing"], vocab=doc["vocab"])
    if doc["kind"] == "linear_softmax":
        return LinearSoftmaxModel(np.array(body["embedding"]), np.array(body["output"]),
                                  np.array(body["bias"]), body["context_window"],
                                  doc["eos_id"], decay=body["decay"], vocab=doc["vocab"],
                                  seed=body.get("seed"))
    raise ValueError(f"unknown model kind {doc['kind']!r}")


def save_model(model: LanguageModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path) -> LanguageModel:
    return model_from_dict(json.loads(Path(path).read_text()))
