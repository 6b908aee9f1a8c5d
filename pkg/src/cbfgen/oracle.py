"""Brute-force reference implementations for verification.

Everything here recomputes filter behavior from the bare definition, with no
shared masking or scanning code, so it can serve as an independent check of
the production filter path. Sizes are expected to be desk-scale (N <= a few
hundred); nothing is optimized.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .constraint import ConstraintFunction
from .core import Text, concat
from .filters import CbfConfig, cbf_filter

from .errors import FilterStalled


def brute_force_allowed(
    probs: Sequence[float],
    text: Text,
    constraint: ConstraintFunction,
    alpha: float,
    k_top: int,
) -> set[int]:
    """Allowed token set by direct evaluation of the barrier condition.

    Evaluates h on every one-token extension, keeps every satisfier, then
    truncates to the k_top most probable satisfiers (ties toward the lower
    token id). No scanning, no early exit.
    """
    probs = np.asarray(probs, dtype=np.float64)
    h_current = constraint.evaluate(text)
    satisfiers = []
    for token in range(1, probs.shape[0] + 1):
        h_next = constraint.evaluate(concat(text, token))
        if h_next - h_current >= -alpha * h_current:
            satisfiers.append(token)
    ranked = sorted(satisfiers, key=lambda t: (-probs[t - 1], t))
    return set(ranked[:k_top])


def brute_force_filtered(
    probs: Sequence[float],
    text: Text,
    constraint: ConstraintFunction,
    alpha: float,
    k_top: int,
) -> np.ndarray:
    """Filtered vector implied by :func:`brute_force_allowed`."""
    probs = np.asarray(probs, dtype=np.float64)
    allowed = brute_force_allowed(probs, text, constraint, alpha, k_top)
    out = np.zeros_like(probs)
    for token in allowed:
        out[token - 1] = probs[token - 1]
    return out


def enumerate_tree(text: Text, vocab_size: int, depth: int) -> list[Text]:
    """Every text reachable from ``text`` by appending up to ``depth`` tokens."""
    frontier = [text]
    reached = [text]
    for _ in range(depth):
        frontier = [concat(x, t) for x in frontier for t in range(1, vocab_size + 1)]
        reached.extend(frontier)
    return reached


def compare_allowed_sets(
    probs_for: "callable",
    texts: Sequence[Text],
    constraint: ConstraintFunction,
    alpha: float,
    k_top: int,
    max_scan: int | None = None,
) -> list[tuple[Text, set[int], set[int]]]:
    """Mismatches between the production filter and the brute-force oracle.

    ``probs_for(text)`` supplies the probability vector at each text. Returns
    one (text, filter_set, oracle_set) triple per disagreement; empty means
    exact equivalence. A stalled filter is compared against an empty oracle
    set.
    """
    cfg = CbfConfig(alpha=alpha, k_top=k_top, max_scan=max_scan)
    mismatches = []
    for text in texts:
        probs = probs_for(text)
        oracle_set = brute_force_allowed(probs, text, constraint, alpha, k_top)
        try:
            _, decision = cbf_filter(probs, text, constraint, cfg)
            filter_set = {c.token for c in decision.candidates if c.allowed}
        except FilterStalled:
            filter_set = set()
        if filter_set != oracle_set:
            mismatches.append((text, filter_set, oracle_set))
    return mismatches
