import threading

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cbfgen.constraint import (
    ClassScores,
    ClassifierConstraint,
    NumericConstraint,
    make_classifier_constraint,
    make_numeric_constraint,
    sentiment_margin,
)
from cbfgen.core import Text, concat
from cbfgen.errors import ConstraintEvaluationError


class TestClassScores:
    def test_valid(self):
        s = ClassScores(0.1, 0.2, 0.7)
        assert s.positive == 0.7

    def test_sum_checked(self):
        with pytest.raises(ValueError):
            ClassScores(0.5, 0.5, 0.5)

    def test_range_checked(self):
        with pytest.raises(ValueError):
            ClassScores(-0.1, 0.4, 0.7)


class TestSentimentMargin:
    def test_positive_dominates(self):
        assert sentiment_margin(ClassScores(0.1, 0.2, 0.7)) == pytest.approx(0.5)

    def test_uniform_is_zero(self):
        assert sentiment_margin(ClassScores(1 / 3, 1 / 3, 1 / 3)) == pytest.approx(0.0)

    def test_negative_dominates(self):
        assert sentiment_margin(ClassScores(0.6, 0.1, 0.3)) == pytest.approx(-0.3)

    def test_range_over_simplex_grid(self):
        """Exhaustive over the probability simplex at resolution 0.01."""
        steps = 100
        lo, hi = 1.0, -1.0
        for i in range(steps + 1):
            for j in range(steps + 1 - i):
                neg = i / steps
                neu = j / steps
                pos = 1.0 - neg - neu
                m = sentiment_margin(ClassScores(neg, neu, max(pos, 0.0)))
                assert -1.0 <= m <= 1.0
                lo, hi = min(lo, m), max(hi, m)
        assert hi == pytest.approx(1.0)  # (0, 0, 1)
        assert lo == pytest.approx(-1.0)  # (1, 0, 0)

    def test_sign_iff_positive_strictly_dominates(self):
        assert sentiment_margin(ClassScores(0.3, 0.3, 0.4)) > 0
        assert sentiment_margin(ClassScores(0.4, 0.2, 0.4)) == pytest.approx(0.0)


class TestClassifierConstraint:
    def test_composes_scorer(self):
        c = make_classifier_constraint(lambda text: ClassScores(0.1, 0.2, 0.7))
        assert c.evaluate(Text([1, 2])) == pytest.approx(0.5)
        assert c.evaluate(Text()) == pytest.approx(0.5)

    def test_scorer_failure_wrapped(self):
        def broken(text):
            raise RuntimeError("boom")

        c = make_classifier_constraint(broken)
        with pytest.raises(ConstraintEvaluationError):
            c.evaluate(Text([1]))

    def test_cache_avoids_recomputation(self):
        calls = []

        def scorer(text):
            calls.append(text.tokens)
            return ClassScores(0.2, 0.2, 0.6)

        c = make_classifier_constraint(scorer)
        x = Text([1, 2, 3])
        c.evaluate(x)
        c.evaluate(x)
        c.evaluate_many([x, x, Text([1])])
        assert calls == [(1, 2, 3), (1,)]

    def test_batch_scorer_used(self):
        batches = []

        class Scorer:
            def __call__(self, text):
                return ClassScores(0.0, 0.0, 1.0)

            def score_many(self, texts):
                batches.append(len(texts))
                return [ClassScores(0.0, 0.0, 1.0)] * len(texts)

        c = ClassifierConstraint(Scorer())
        values = c.evaluate_many([Text([1]), Text([2]), Text([3])])
        assert values == [1.0, 1.0, 1.0]
        assert batches == [3]

    def test_concurrent_reads(self):
        c = make_classifier_constraint(lambda text: ClassScores(0.1, 0.2, 0.7))
        errors = []

        def worker():
            try:
                for i in range(200):
                    c.evaluate(Text([1 + i % 7]))
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors


class TestNumericConstraint:
    def test_sums_weights(self):
        c = make_numeric_constraint({1: 0.1, 2: -0.3}, bias=0.2)
        assert c.evaluate(Text([1, 1])) == pytest.approx(0.4)

    def test_clamps_low(self):
        c = make_numeric_constraint({1: 0.1, 2: -0.3}, bias=0.2)
        assert c.evaluate(Text([2] * 5)) == -1.0

    def test_bias_only_on_empty(self):
        c = make_numeric_constraint({1: 0.1, 2: -0.3}, bias=0.2)
        assert c.evaluate(Text()) == pytest.approx(0.2)

    def test_unknown_tokens_weightless(self):
        c = make_numeric_constraint({1: 0.1}, bias=0.0)
        assert c.evaluate(Text([5, 5])) == 0.0

    @given(
        st.dictionaries(st.integers(1, 8), st.floats(-0.3, 0.3), min_size=1),
        st.floats(-0.5, 0.5),
        st.lists(st.integers(1, 8), max_size=6),
        st.integers(1, 8),
    )
    def test_linear_increment_when_unclamped(self, weights, bias, tokens, token):
        c = make_numeric_constraint(weights, bias=bias)
        x = Text(tokens)
        before = c.evaluate(x)
        after = c.evaluate(concat(x, token))
        if abs(before) < 1.0 and abs(after) < 1.0:
            assert after - before == pytest.approx(weights.get(token, 0.0), abs=1e-12)


class TestSignConvention:
    """h >= 0 exactly on fixtures labeled desirable."""

    def test_labeled_fixtures(self):
        c = make_numeric_constraint({1: 0.2, 2: -0.2}, bias=0.0)
        desirable = [Text(), Text([1]), Text([1, 2]), Text([1, 1, 2])]
        undesirable = [Text([2]), Text([2, 2, 1])]
        for x in desirable:
            assert c.evaluate(x) >= 0
        for x in undesirable:
            assert c.evaluate(x) < 0
