"""Constraint functions h mapping texts to reals.

Sign convention: h(x) >= 0 means x is in the desirable set, h(x) < 0 means it
is not. The barrier filters consume these to decide which candidate tokens may
pass. Evaluations are memoized per text (keyed by the token tuple) because one
filter step evaluates h on many one-token extensions of the same prefix, and
classifier-backed evaluators dominate the cost of a step.
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .core import Text
from .errors import ConstraintEvaluationError

DEFAULT_CACHE_SIZE = 65536


@dataclass(frozen=True)
class ClassScores:
    """Softmax output of a 3-way sentiment classifier."""

    negative: float
    neutral: float
    positive: float

    def __post_init__(self):
        values = (self.negative, self.neutral, self.positive)
        for v in values:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"class score {v} outside [0, 1]")
        total = sum(values)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"class scores sum to {total}, expected 1 within 1e-6")


def sentiment_margin(scores: ClassScores) -> float:
    """Positive score minus the larger of the other two; in [-1, 1].

    Positive exactly when the positive class strictly dominates both others.
    """
    return scores.positive - max(scores.negative, scores.neutral)


class ConstraintFunction:
    """Base evaluator with a synchronized LRU memo over token tuples.

    Subclasses implement ``_compute(text) -> float``; callers use
    ``evaluate`` / ``evaluate_many``. Determinism per text is part of the
    contract, which is what makes memoization safe.
    """

    def __init__(self, cache_size: int = DEFAULT_CACHE_SIZE):
        self._cache: OrderedDict[tuple[int, ...], float] = OrderedDict()
        self._cache_size = cache_size
        self._lock = threading.Lock()

    def _compute(self, text: Text) -> float:
        raise NotImplementedError

    def evaluate(self, text: Text) -> float:
        key = text.tokens
        with self._lock:
            if key in self._cache:
                self._cache.move_to_end(key)
                return self._cache[key]
        value = float(self._compute(text))
        with self._lock:
            self._cache[key] = value
            if len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return value

    def evaluate_many(self, texts: Sequence[Text]) -> list[float]:
        """Batch form; semantics identical to mapping ``evaluate``.

        Subclasses backed by remote scorers override ``_compute_many`` to
        amortize round-trips; results still pass through the cache.
        """
        missing = [t for t in texts if self._peek(t) is None]
        if missing:
            # dedupe while preserving order
            unique = list(dict.fromkeys(t.tokens for t in missing))
            values = self._compute_many([Text(k) for k in unique])
            with self._lock:
                for key, value in zip(unique, values):
                    self._cache[key] = float(value)
                while len(self._cache) > self._cache_size:
                    self._cache.popitem(last=False)
        return [self.evaluate(t) for t in texts]

    def _compute_many(self, texts: Sequence[Text]) -> list[float]:
        return [float(self._compute(t)) for t in texts]

    def _peek(self, text: Text) -> float | None:
        with self._lock:
            return self._cache.get(text.tokens)


class ClassifierConstraint(ConstraintFunction):
    """h(x) = sentiment_margin(scorer(x)) for a 3-class scorer."""

    def __init__(self, scorer: Callable[[Text], ClassScores], cache_size: int = DEFAULT_CACHE_SIZE):
        super().__init__(cache_size)
        self._scorer = scorer

    def _compute(self, text: Text) -> float:
        try:
            scores = self._scorer(text)
        except ConstraintEvaluationError:
            raise
        except Exception as exc:
            raise ConstraintEvaluationError(f"scorer failed on {text!r}: {exc}") from exc
        return sentiment_margin(scores)

    def _compute_many(self, texts: Sequence[Text]) -> list[float]:
        score_many = getattr(self._scorer, "score_many", None)
        if score_many is None:
            return super()._compute_many(texts)
        try:
            batches = score_many(texts)
        except ConstraintEvaluationError:
            raise
        except Exception as exc:
            raise ConstraintEvaluationError(f"batch scorer failed: {exc}") from exc
        return [sentiment_margin(s) for s in batches]


class NumericConstraint(ConstraintFunction):
    """Analytic test double: bias plus per-token weights, clamped to [-1, 1].

    Exactly linear between the clamp boundaries, which makes filter behavior
    predictable by hand and lets oracle tests compute expected values directly.
    The clamp mirrors the bounded range of classifier-backed constraints so
    histograms stay comparable.
    """

    def __init__(self, weights: Mapping[int, float], bias: float = 0.0,
                 cache_size: int = DEFAULT_CACHE_SIZE):
        super().__init__(cache_size)
        self.weights = {int(t): float(w) for t, w in weights.items()}
        self.bias = float(bias)

    def _compute(self, text: Text) -> float:
        raw = self.bias
        weights = self.weights
        for t in text.tokens:
            raw += weights.get(t, 0.0)
        return min(1.0, max(-1.0, raw))


class CallableConstraint(ConstraintFunction):
    """Wrap a plain ``Text -> float`` callable as a constraint function."""

    def __init__(self, fn: Callable[[Text], float], cache_size: int = DEFAULT_CACHE_SIZE):
        super().__init__(cache_size)
        self._fn = fn

    def _compute(self, text: Text) -> float:
        return self._fn(text)


def make_classifier_constraint(
    scorer: Callable[[Text], ClassScores]
) -> ClassifierConstraint:
    return ClassifierConstraint(scorer)


def make_numeric_constraint(
    weights: Mapping[int, float], bias: float = 0.0
) -> NumericConstraint:
    return NumericConstraint(weights, bias)


def make_remote_classifier_constraint(endpoint: str) -> ClassifierConstraint:
    """Constraint backed by the inference bridge's /scores endpoint."""
    from .bridge_client import RemoteScorer

    return ClassifierConstraint(RemoteScorer(endpoint))


def require_finite(value: float, text: Text) -> float:
    if not math.isfinite(value):
        raise ConstraintEvaluationError(f"constraint returned {value} on {text!r}")
    return value
