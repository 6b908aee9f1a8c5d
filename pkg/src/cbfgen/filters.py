"""Safety filters that mask a next-token probability vector.

The barrier filter walks candidates in descending-probability order (ties
broken toward the lower token id) and keeps a candidate t exactly when

    h(x + t) - h(x) >= -alpha * h(x)

stopping once k_top candidates have been allowed, the scan budget is spent,
or the vocabulary is exhausted. Allowed tokens keep their input probability
unchanged; everything else becomes zero. Rescaling back to a distribution is
the normalizer's job, not the filter's, so the intervention stays minimal
and auditable.

With alpha = 1 the condition reduces to h(x + t) >= 0, the blacklist filter.
With alpha = 0 it requires h to be non-decreasing. The no-control filter
skips the condition entirely and just keeps the k_top most probable tokens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constraint import ConstraintFunction
from .core import Text, check_probability_vector, concat
from .errors import ConstraintEvaluationError, FilterStalled

#: Scan budget used when a config does not set one: min(vocab size, 512).
DEFAULT_MAX_SCAN = 512


@dataclass(frozen=True)
class CbfConfig:
    """Barrier filter parameters.

    alpha in [0, 1] sets the strictness of the barrier condition; k_top is
    the number of allowed candidates to collect; max_scan bounds how many
    candidates may be examined before the filter declares a stall (None
    means min(vocab size, 512), resolved per call). class_k is reserved for
    alternative margin shapes; only "linear" (margin alpha * h) ships.
    """

    alpha: float
    k_top: int
    max_scan: int | None = None
    class_k: str = "linear"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.k_top < 1:
            raise ValueError(f"k_top must be >= 1, got {self.k_top}")
        if self.max_scan is not None and self.max_scan < self.k_top:
            raise ValueError(
                f"max_scan ({self.max_scan}) must be >= k_top ({self.k_top})"
            )
        if self.class_k != "linear":
            raise ValueError(f"unsupported class_k margin {self.class_k!r}")

    def scan_limit(self, vocab_size: int) -> int:
        budget = DEFAULT_MAX_SCAN if self.max_scan is None else self.max_scan
        return min(budget, vocab_size)


@dataclass(frozen=True)
class Candidate:
    """One examined token: its prior probability, h after appending, verdict.

    h_next is NaN when the filter never consulted the constraint (no-control
    without annotation).
    """

    token: int
    prob: float
    h_next: float
    allowed: bool


@dataclass(frozen=True)
class FilterDecision:
    """Audit record of one filter invocation.

    Candidates appear in scan order: descending prior probability, ties by
    ascending token id. ``scanned`` equals ``len(candidates)``.
    """

    step: int
    candidates: tuple[Candidate, ...]
    h_current: float
    scanned: int

    @property
    def allowed_count(self) -> int:
        return sum(1 for c in self.candidates if c.allowed)

    @property
    def disallowed_count(self) -> int:
        return sum(1 for c in self.candidates if not c.allowed)


def scan_order(probs: np.ndarray) -> np.ndarray:
    """Token ids (1-based) in descending-probability order, ties by lower id."""
    order = np.argsort(-probs, kind="stable")
    return order + 1


def _check_h(value: float, text: Text) -> float:
    if not math.isfinite(value):
        raise ConstraintEvaluationError(f"constraint returned {value} on {text!r}")
    return value


def cbf_filter(
    probs: np.ndarray,
    text: Text,
    constraint: ConstraintFunction,
    cfg: CbfConfig,
    step: int = 0,
) -> tuple[np.ndarray, FilterDecision]:
    """Mask ``probs`` down to tokens satisfying the barrier condition.

    Candidate h values are fetched in batches of the number of tokens still
    needed, through ``evaluate_many``, so remote constraints can amortize
    round-trips; accounting is identical to a one-by-one scan because the
    batch tail past the k_top-th allowed token is discarded.

    Raises FilterStalled when the scan budget is exhausted with zero allowed
    tokens; returns a partial allowance (fewer than k_top) otherwise.
    """
    probs = check_probability_vector(probs)
    n = probs.shape[0]
    limit = cfg.scan_limit(n)
    h_current = _check_h(constraint.evaluate(text), text)
    threshold = -cfg.alpha * h_current

    order = scan_order(probs)
    out = np.zeros_like(probs)
    examined: list[Candidate] = []
    allowed_count = 0
    pos = 0
    while allowed_count < cfg.k_top and pos < limit:
        batch = order[pos : pos + min(cfg.k_top - allowed_count, limit - pos)]
        next_texts = [concat(text, int(t)) for t in batch]
        h_values = constraint.evaluate_many(next_texts)
        for token, x_next, h_next in zip(batch, next_texts, h_values):
            token = int(token)
            h_next = _check_h(h_next, x_next)
            allowed = h_next - h_current >= threshold
            examined.append(Candidate(token, float(probs[token - 1]), h_next, allowed))
            pos += 1
            if allowed:
                out[token - 1] = probs[token - 1]
                allowed_count += 1
                if allowed_count == cfg.k_top:
                    break

    decision = FilterDecision(
        step=step,
        candidates=tuple(examined),
        h_current=h_current,
        scanned=len(examined),
    )
    if allowed_count == 0:
        raise FilterStalled(
            f"no token satisfied the barrier condition within {pos} candidates "
            f"(h={h_current:.6g}, alpha={cfg.alpha})",
            decision=decision,
        )
    return out, decision


def blacklist_filter(
    probs: np.ndarray,
    text: Text,
    constraint: ConstraintFunction,
    k_top: int,
    max_scan: int | None = None,
    step: int = 0,
) -> tuple[np.ndarray, FilterDecision]:
    """Barrier filter at alpha = 1: disallow only tokens whose h goes negative."""
    cfg = CbfConfig(alpha=1.0, k_top=k_top, max_scan=max_scan)
    return cbf_filter(probs, text, constraint, cfg, step=step)


def nocontrol_filter(
    probs: np.ndarray,
    k_top: int,
    step: int = 0,
    constraint: ConstraintFunction | None = None,
    text: Text | None = None,
) -> tuple[np.ndarray, FilterDecision]:
    """Keep the k_top most probable tokens; every examined candidate is allowed.

    When ``constraint`` and ``text`` are given, candidate records carry the h
    value of each extension for downstream analysis; verdicts and the output
    vector are unaffected. Without them h fields are NaN and such candidates
    are skipped by the histogram exporter.
    """
    probs = check_probability_vector(probs)
    n = probs.shape[0]
    if not 1 <= k_top <= n:
        raise ValueError(f"k_top must be in [1, {n}], got {k_top}")
    order = scan_order(probs)[:k_top]
    h_current = math.nan
    h_values: Sequence[float]
    if constraint is not None and text is not None:
        h_current = _check_h(constraint.evaluate(text), text)
        next_texts = [concat(text, int(t)) for t in order]
        h_values = [
            _check_h(h, x) for h, x in zip(constraint.evaluate_many(next_texts), next_texts)
        ]
    else:
        h_values = [math.nan] * len(order)

    out = np.zeros_like(probs)
    examined = []
    for token, h_next in zip(order, h_values):
        token = int(token)
        out[token - 1] = probs[token - 1]
        examined.append(Candidate(token, float(probs[token - 1]), h_next, True))
    decision = FilterDecision(
        step=step,
        candidates=tuple(examined),
        h_current=h_current,
        scanned=len(examined),
    )
    return out, decision


def count_disallowed(decisions: Sequence[FilterDecision]) -> int:
    """Total candidates rejected across the decisions of one generation run."""
    return sum(d.disallowed_count for d in decisions)
