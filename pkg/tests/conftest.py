import math

import pytest

from cbfgen.constraint import ConstraintFunction
from cbfgen.core import Text, Vocabulary


class DictConstraint(ConstraintFunction):
    """Constraint with explicitly tabulated h values, keyed by token tuple."""

    def __init__(self, table, default=None):
        super().__init__()
        self.table = {tuple(k): float(v) for k, v in table.items()}
        self.default = default

    def _compute(self, text):
        key = text.tokens
        if key in self.table:
            return self.table[key]
        if self.default is not None:
            return self.default
        raise KeyError(f"no h value tabulated for {key}")


class HashConstraint(ConstraintFunction):
    """Deterministic pseudo-random h in [-1, 1] per text, from a seed."""

    def __init__(self, seed=0):
        super().__init__()
        self.seed = seed

    def _compute(self, text):
        # splitmix-style scramble of the token tuple; stable across runs
        acc = (self.seed * 0x9E3779B97F4A7C15 + 0x85EBCA6B) & 0xFFFFFFFFFFFFFFFF
        for t in text.tokens:
            acc ^= (t * 0xBF58476D1CE4E5B9 + 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
            acc = (acc * 0xD6E8FEB86659FD93 + 1) & 0xFFFFFFFFFFFFFFFF
            acc ^= acc >> 29
        return (acc % 20001) / 10000.0 - 1.0


class ParityConstraint(ConstraintFunction):
    """Two-level constraint: +0.5 when the last token is even, -0.5 otherwise."""

    def __init__(self):
        super().__init__()

    def _compute(self, text):
        if not text.tokens:
            return 0.5
        return 0.5 if text.tokens[-1] % 2 == 0 else -0.5


@pytest.fixture
def tiny_vocab():
    return Vocabulary(size=3)


@pytest.fixture
def text_empty():
    return Text()


def assert_close(a, b, tol=1e-12):
    assert math.isfinite(a) and math.isfinite(b)
    assert abs(a - b) <= tol, f"{a} != {b} within {tol}"
