"""Vocabulary, text, and probability primitives shared by every other module.

Token ids are 1-based: a vocabulary of size N contains the ids {1, ..., N}.
Probability and logit vectors are plain numpy arrays indexed 0-based, so the
entry for token ``t`` lives at ``vec[t - 1]``. Every function that crosses
that boundary states it explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import NormalizationError, TokenRangeError

#: Sum tolerance under which a probability vector counts as normalized.
NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class Vocabulary:
    """The token universe: ids 1..size, optional display strings, eos ids.

    ``token_display`` maps token id to a rendering string and is only used
    for human-readable output; ``eos_tokens`` are the ids that terminate a
    generation run when sampled.
    """

    size: int
    token_display: Mapping[int, str] | None = None
    eos_tokens: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"vocabulary size must be >= 1, got {self.size}")
        object.__setattr__(self, "eos_tokens", frozenset(self.eos_tokens))
        bad = [t for t in self.eos_tokens if not self.contains(t)]
        if bad:
            raise TokenRangeError(f"eos tokens {bad} outside [1, {self.size}]")
        if self.token_display is not None:
            bad = [t for t in self.token_display if not self.contains(t)]
            if bad:
                raise TokenRangeError(f"display tokens {bad} outside [1, {self.size}]")

    def contains(self, token: int) -> bool:
        return 1 <= token <= self.size

    def require(self, token: int) -> None:
        if not self.contains(token):
            raise TokenRangeError(f"token id {token} outside [1, {self.size}]")

    def render(self, text: "Text", sep: str = " ") -> str:
        """Join the display strings of ``text``; unknown ids render as <id>."""
        display = self.token_display or {}
        return sep.join(display.get(t, f"<{t}>") for t in text)


class Text:
    """An immutable sequence of 1-based token ids.

    Texts are values: extending one with :func:`concat` produces a new Text
    and never mutates the original, which keeps trajectory logs and replay
    trivially correct.
    """

    __slots__ = ("tokens",)

    def __init__(self, tokens: Iterable[int] = ()):
        toks = tuple(int(t) for t in tokens)
        for t in toks:
            if t < 1:
                raise TokenRangeError(f"token id {t} must be >= 1")
        object.__setattr__(self, "tokens", toks)

    def __setattr__(self, name, value):
        raise AttributeError("Text is immutable")

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[int]:
        return iter(self.tokens)

    def __getitem__(self, idx):
        return self.tokens[idx]

    def __eq__(self, other) -> bool:
        return isinstance(other, Text) and self.tokens == other.tokens

    def __hash__(self) -> int:
        return hash(self.tokens)

    def __repr__(self) -> str:
        return f"Text({list(self.tokens)!r})"

    def prefix(self, length: int) -> "Text":
        return Text(self.tokens[:length])


def concat(text: Text, token: int, vocab: Vocabulary | None = None) -> Text:
    """Return a new Text extending ``text`` by one token.

    Token ids must be >= 1; when a vocabulary is supplied the id must also be
    <= its size. The input text is unchanged.
    """
    token = int(token)
    if token < 1:
        raise TokenRangeError(f"token id {token} must be >= 1")
    if vocab is not None:
        vocab.require(token)
    return Text(text.tokens + (token,))


def check_probability_vector(p: np.ndarray, size: int | None = None) -> np.ndarray:
    """Validate a non-negative 1-D vector, optionally of a given length."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError(f"probability vector must be 1-D, got shape {p.shape}")
    if size is not None and p.shape[0] != size:
        raise ValueError(f"probability vector has length {p.shape[0]}, expected {size}")
    if not np.all(np.isfinite(p)):
        raise ValueError("probability vector has non-finite entries")
    if np.any(p < 0):
        raise ValueError("probability vector has negative entries")
    return p


def is_normalized(p: np.ndarray, tol: float = NORMALIZATION_TOL) -> bool:
    p = np.asarray(p, dtype=np.float64)
    return abs(float(p.sum()) - 1.0) <= tol


def normalize(p: np.ndarray) -> np.ndarray:
    """Rescale a non-negative vector to sum to 1.

    Zero entries stay zero and ratios between positive entries are preserved.
    Raises NormalizationError when the vector carries no positive mass.
    """
    p = check_probability_vector(p)
    total = float(p.sum())
    if total <= 0.0:
        raise NormalizationError("cannot normalize a vector with no positive mass")
    return p / total
