"""Seeded synthetic fixtures for desk-scale experiments and verification.

A synthetic corpus is a batch of random walks over a seeded Markov chain, so
an n-gram predictor trained on it has real transition structure. Synthetic
constraint weights are small signed per-token drifts, giving barrier filters
something meaningful to allow and reject.
"""

from __future__ import annotations

import numpy as np

from .constraint import NumericConstraint
from .core import Text, Vocabulary
from .predictor import NgramPredictor


def make_synthetic_corpus(
    vocab_size: int,
    n_texts: int = 20,
    length: int = 40,
    seed: int = 7,
) -> list[list[int]]:
    """Random-walk corpus over a seeded sparse Markov chain."""
    rng = np.random.Generator(np.random.PCG64(seed))
    fanout = max(2, min(6, vocab_size))
    successors = {
        t: rng.integers(1, vocab_size + 1, size=fanout)
        for t in range(1, vocab_size + 1)
    }
    corpus = []
    for _ in range(n_texts):
        token = int(rng.integers(1, vocab_size + 1))
        walk = [token]
        for _ in range(length - 1):
            token = int(rng.choice(successors[token]))
            walk.append(token)
        corpus.append(walk)
    return corpus


def make_synthetic_weights(
    vocab_size: int,
    spread: float = 0.2,
    seed: int = 11,
) -> dict[int, float]:
    """Per-token drift weights drawn uniformly from [-spread, spread]."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return {
        t: float(rng.uniform(-spread, spread))
        for t in range(1, vocab_size + 1)
    }


def desk_fixture(
    vocab_size: int = 50,
    seed: int = 7,
    bias: float = 0.3,
    eos_tokens: tuple[int, ...] = (),
) -> tuple[Vocabulary, NgramPredictor, NumericConstraint, Text]:
    """Standard small fixture: vocabulary, n-gram predictor, numeric constraint,
    and an initial text whose h is non-negative."""
    vocab = Vocabulary(size=vocab_size, eos_tokens=frozenset(eos_tokens))
    corpus = make_synthetic_corpus(vocab_size, seed=seed)
    predictor = NgramPredictor(corpus, vocab_size, order=2, smoothing=0.01)
    weights = make_synthetic_weights(vocab_size, seed=seed + 4)
    constraint = NumericConstraint(weights, bias=bias)
    rng = np.random.Generator(np.random.PCG64(seed + 9))
    initial = Text([int(rng.integers(1, vocab_size + 1)) for _ in range(3)])
    h0 = constraint.evaluate(initial)
    if h0 < 0:
        # shift the bias so the starting point sits inside the desirable set
        constraint = NumericConstraint(weights, bias=bias - h0 + 0.1)
    return vocab, predictor, constraint, initial
