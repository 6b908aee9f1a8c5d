"""Self-contained property checks runnable from the command line.

Each check returns (name, passed, detail). They mirror the core guarantees:
exhaustive oracle equivalence at small vocabulary sizes, the geometric safety
recurrence, blacklist/barrier(alpha=1) equivalence, and histogram mass
conservation. ``mutate_constraint_sign`` exists as a sanity hook: flipping
the barrier inequality must make the safety recurrence check fail.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .analysis import attractor_histogram
from .constraint import NumericConstraint
from .core import Text, normalize
from .errors import FilterStalled
from .filters import CbfConfig, blacklist_filter, cbf_filter
from .oracle import compare_allowed_sets, enumerate_tree
from .pipeline import (
    FilterKind,
    GenerationConfig,
    run_batch,
)
from .predictor import predict
from .synthetic import desk_fixture, make_synthetic_weights


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_oracle_equivalence(vocab_size: int = 8, depth: int = 3) -> CheckResult:
    """Production filter vs brute-force barrier evaluation, exhaustively."""
    vocab, predictor, constraint, initial = desk_fixture(vocab_size, seed=3)
    texts = enumerate_tree(initial, vocab_size, depth)
    total_mismatches = 0
    for alpha in (0.0, 0.3, 0.8, 1.0):
        mismatches = compare_allowed_sets(
            probs_for=lambda t: predict(predictor, t),
            texts=texts,
            constraint=constraint,
            alpha=alpha,
            k_top=vocab_size,
        )
        total_mismatches += len(mismatches)
    passed = total_mismatches == 0
    return CheckResult(
        "oracle-equivalence",
        passed,
        f"{len(texts)} texts x 4 alphas, {total_mismatches} mismatches",
    )


def check_safety_recurrence(
    n_runs: int = 50,
    steps: int = 20,
    filter_func: Callable | None = None,
) -> CheckResult:
    """h(k) >= (1 - alpha)^k h(0) >= 0 along every barrier-filtered run.

    ``filter_func`` swaps in an alternative filter implementation (the
    mutation hook used to prove the check can fail).
    """
    vocab, predictor, constraint, initial = desk_fixture(50, seed=5)
    violations = 0
    checked = 0
    for alpha in (0.3, 0.8):
        cfg = GenerationConfig(
            vocab=vocab,
            initial_text=initial,
            filter_kind=FilterKind.CBF,
            k_top=8,
            max_new_tokens=steps,
            seed=0,
            alpha=alpha,
        )
        for i in range(n_runs):
            record = _generate_with(predictor, constraint, replace(cfg, seed=1000 + i),
                                     filter_func)
            h0 = record.h_initial
            for step in record.steps:
                bound = (1 - alpha) ** (step.k + 1) * h0
                checked += 1
                if step.h_value < bound - 1e-9 or step.h_value < -1e-9:
                    violations += 1
    return CheckResult(
        "safety-recurrence",
        violations == 0,
        f"{checked} logged steps, {violations} bound violations",
    )


def _generate_with(predictor, constraint, cfg, filter_func):
    """Tiny re-implementation of the loop that accepts a pluggable filter."""
    from .pipeline import generate, make_rng, select_token
    from .core import concat

    if filter_func is None:
        return generate(predictor, constraint, cfg)

    rng = make_rng(cfg.seed)
    text = cfg.initial_text
    h_prev = constraint.evaluate(text)
    h_initial = h_prev
    steps = []
    from .pipeline import StepRecord, Termination, TrajectoryRecord

    termination = Termination.MAX_TOKENS
    for k in range(cfg.max_new_tokens):
        probs = predict(predictor, text, cfg.temperature)
        try:
            filtered, decision = filter_func(probs, text, constraint, alpha=cfg.alpha,
                                             k_top=cfg.k_top, step=k)
            q = normalize(filtered)
        except FilterStalled:
            termination = Termination.STALLED
            break
        chosen = select_token(q, rng)
        text = concat(text, chosen, cfg.vocab)
        h_new = constraint.evaluate(text)
        steps.append(StepRecord(k, chosen, h_new, h_new - h_prev, decision))
        h_prev = h_new
    return TrajectoryRecord(
        steps=tuple(steps),
        final_text=text,
        termination=termination,
        filter_kind=cfg.filter_kind,
        h_initial=h_initial,
        seed=cfg.seed,
    )


def sign_mutated_filter(probs, text, constraint, alpha, k_top, step=0):
    """Deliberately broken filter keeping tokens that VIOLATE the barrier.

    Used to confirm the safety check has teeth.
    """
    from .core import concat
    from .filters import Candidate, FilterDecision

    h_current = constraint.evaluate(text)
    order = np.argsort(-probs, kind="stable") + 1
    out = np.zeros_like(probs)
    examined = []
    allowed_count = 0
    for token in order:
        token = int(token)
        h_next = constraint.evaluate(concat(text, token))
        allowed = h_next - h_current < -alpha * h_current  # flipped on purpose
        examined.append(Candidate(token, float(probs[token - 1]), h_next, allowed))
        if allowed:
            out[token - 1] = probs[token - 1]
            allowed_count += 1
            if allowed_count == k_top:
                break
    decision = FilterDecision(step=step, candidates=tuple(examined),
                              h_current=h_current, scanned=len(examined))
    if allowed_count == 0:
        raise FilterStalled("mutated filter stalled", decision=decision)
    return out, decision


def check_blacklist_equivalence(n_instances: int = 500, seed: int = 0) -> CheckResult:
    """blacklist_filter and cbf_filter(alpha=1) agree exactly on random instances."""
    rng = np.random.Generator(np.random.PCG64(seed))
    mismatches = 0
    for i in range(n_instances):
        n = int(rng.integers(2, 12))
        probs = normalize(rng.random(n))
        weights = {t: float(rng.uniform(-0.5, 0.5)) for t in range(1, n + 1)}
        constraint = NumericConstraint(weights, bias=float(rng.uniform(-0.2, 0.8)))
        text = Text([int(rng.integers(1, n + 1))])
        k_top = int(rng.integers(1, n + 1))
        cfg = CbfConfig(alpha=1.0, k_top=k_top)
        try:
            out_a, dec_a = blacklist_filter(probs, text, constraint, k_top)
            stalled_a = False
        except FilterStalled as e:
            out_a, dec_a, stalled_a = None, e.decision, True
        try:
            out_b, dec_b = cbf_filter(probs, text, constraint, cfg)
            stalled_b = False
        except FilterStalled as e:
            out_b, dec_b, stalled_b = None, e.decision, True
        same = stalled_a == stalled_b and dec_a == dec_b
        if same and not stalled_a:
            same = np.array_equal(out_a, out_b)
        if not same:
            mismatches += 1
    return CheckResult(
        "blacklist-equals-cbf-alpha-1",
        mismatches == 0,
        f"{n_instances} random instances, {mismatches} mismatches",
    )


def check_histogram_conservation() -> CheckResult:
    """Histogram mass equals the number of scanned candidates, per filter."""
    vocab, predictor, constraint, initial = desk_fixture(20, seed=13)
    bad = []
    for kind, alpha in ((FilterKind.NOCONTROL, None), (FilterKind.BLACKLIST, None),
                        (FilterKind.CBF, 0.5)):
        cfg = GenerationConfig(
            vocab=vocab,
            initial_text=initial,
            filter_kind=kind,
            k_top=5,
            max_new_tokens=10,
            seed=0,
            alpha=alpha,
        )
        batch = run_batch(predictor, constraint, cfg, n_samples=10, base_seed=40)
        records = batch.completed
        scanned = sum(d.scanned for r in records for d in r.all_decisions())
        hist = attractor_histogram(records)
        if hist.total != scanned:
            bad.append(f"{kind.value}: {hist.total} != {scanned}")
    return CheckResult(
        "histogram-conservation",
        not bad,
        "; ".join(bad) if bad else "mass conserved for all three filter kinds",
    )


def run_verification(mutate_constraint_sign: bool = False) -> list[CheckResult]:
    filter_func = sign_mutated_filter if mutate_constraint_sign else None
    return [
        check_oracle_equivalence(),
        check_safety_recurrence(filter_func=filter_func),
        check_blacklist_equivalence(),
        check_histogram_conservation(),
    ]
