"""Next-token predictors: temperature softmax over a pluggable logit source.

A logit source is anything with a ``vocab_size`` and a deterministic
``evaluate(text) -> logits`` method (length ``vocab_size``, entry ``i`` for
token id ``i + 1``). All sampling randomness lives in the pipeline's token
selector, never here, so runs are replayable from a seed.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Mapping, Protocol, Sequence, runtime_checkable

import numpy as np

from .core import Text
from .errors import PredictorContractError

#: Logit assigned to tokens a remote source did not transmit. Effectively
#: minus infinity for softmax purposes while staying finite for arithmetic.
SENTINEL_LOGIT = -1e9


@runtime_checkable
class LogitSource(Protocol):
    """Deterministic map from a text to raw next-token scores."""

    vocab_size: int

    def evaluate(self, text: Text) -> np.ndarray: ...


def softmax(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Temperature softmax with max-subtraction for numerical stability.

    ``temperature == 0`` is the greedy limit: a one-hot vector on the argmax,
    ties broken toward the lowest token id.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0:
        out = np.zeros_like(logits)
        out[int(np.argmax(logits))] = 1.0
        return out
    z = (logits - logits.max()) / temperature
    e = np.exp(z)
    return e / e.sum()


def predict(source: LogitSource, text: Text, temperature: float = 1.0) -> np.ndarray:
    """Next-token probabilities for ``text``: softmax(logits / temperature).

    Raises PredictorContractError when the source returns a vector of the
    wrong length or with non-finite entries.
    """
    logits = np.asarray(source.evaluate(text), dtype=np.float64)
    if logits.ndim != 1 or logits.shape[0] != source.vocab_size:
        raise PredictorContractError(
            f"logit source returned shape {logits.shape}, expected ({source.vocab_size},)"
        )
    if not np.all(np.isfinite(logits)):
        raise PredictorContractError("logit source returned NaN or infinite entries")
    return softmax(logits, temperature)


class TablePredictor:
    """Logit source backed by an explicit suffix table, for desk-scale tests.

    ``evaluate`` returns the entry whose key is the longest matching suffix of
    the input text, falling back to ``default`` when nothing matches. An
    empty-tuple key matches every text.
    """

    def __init__(
        self,
        table: Mapping[Sequence[int], Sequence[float]],
        default: Sequence[float],
    ):
        self.default = np.asarray(default, dtype=np.float64)
        if self.default.ndim != 1:
            raise ValueError("default logits must be a 1-D vector")
        self.vocab_size = int(self.default.shape[0])
        self.table: dict[tuple[int, ...], np.ndarray] = {}
        for key, logits in table.items():
            vec = np.asarray(logits, dtype=np.float64)
            if vec.shape != (self.vocab_size,):
                raise ValueError(
                    f"table entry {tuple(key)} has length {vec.shape}, "
                    f"expected ({self.vocab_size},)"
                )
            self.table[tuple(int(t) for t in key)] = vec
        self._max_key_len = max((len(k) for k in self.table), default=0)

    def evaluate(self, text: Text) -> np.ndarray:
        toks = text.tokens
        for length in range(min(len(toks), self._max_key_len), -1, -1):
            key = toks[len(toks) - length:]
            hit = self.table.get(key)
            if hit is not None:
                return hit
        return self.default


class NgramPredictor:
    """Add-k smoothed n-gram model over a token corpus.

    Logit for token t given context c (the last order-1 tokens of the text):
    log((count(c, t) + k) / (count(c) + k * N)). Unseen contexts fall back to
    the uniform smoothed distribution.
    """

    def __init__(
        self,
        corpus: Iterable[Sequence[int]],
        vocab_size: int,
        order: int = 2,
        smoothing: float = 0.01,
    ):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        if smoothing <= 0:
            raise ValueError(f"smoothing constant must be > 0, got {smoothing}")
        self.vocab_size = int(vocab_size)
        self.order = order
        self.smoothing = float(smoothing)
        self._follow_counts: dict[tuple[int, ...], defaultdict[int, int]] = {}
        self._context_totals: dict[tuple[int, ...], int] = {}
        for seq in corpus:
            toks = tuple(int(t) for t in seq)
            for t in toks:
                if not 1 <= t <= self.vocab_size:
                    raise ValueError(f"corpus token {t} outside [1, {self.vocab_size}]")
            for i, target in enumerate(toks):
                context = toks[max(0, i - (order - 1)):i]
                bucket = self._follow_counts.setdefault(context, defaultdict(int))
                bucket[target] += 1
                self._context_totals[context] = self._context_totals.get(context, 0) + 1
        self._logit_cache: dict[tuple[int, ...], np.ndarray] = {}

    def _context_of(self, text: Text) -> tuple[int, ...]:
        if self.order == 1:
            return ()
        return text.tokens[-(self.order - 1):]

    def evaluate(self, text: Text) -> np.ndarray:
        context = self._context_of(text)
        cached = self._logit_cache.get(context)
        if cached is not None:
            return cached
        k, n = self.smoothing, self.vocab_size
        counts = np.zeros(n, dtype=np.float64)
        for token, c in self._follow_counts.get(context, {}).items():
            counts[token - 1] = c
        total = self._context_totals.get(context, 0)
        logits = np.log((counts + k) / (total + k * n))
        self._logit_cache[context] = logits
        return logits


def make_table_predictor(
    table: Mapping[Sequence[int], Sequence[float]], default: Sequence[float]
) -> TablePredictor:
    return TablePredictor(table, default)


def make_ngram_predictor(
    corpus: Iterable[Sequence[int]],
    vocab_size: int,
    order: int = 2,
    smoothing: float = 0.01,
) -> NgramPredictor:
    return NgramPredictor(corpus, vocab_size, order=order, smoothing=smoothing)


def make_remote_predictor(endpoint: str, top_logits: int = 100):
    """Logit source backed by a running inference bridge (see bridge_client)."""
    from .bridge_client import RemotePredictor

    return RemotePredictor(endpoint, top_logits=top_logits)
