"""Acceptance suite: one test per release criterion, with pinned tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the pass/fail line
each criterion prints.
"""

import time
from pathlib import Path

import numpy as np

from cbfgen.constraint import NumericConstraint
from cbfgen.core import Text, normalize
from cbfgen.errors import FilterStalled
from cbfgen.experiment import load_spec, run_experiment
from cbfgen.filters import CbfConfig, blacklist_filter, cbf_filter, count_disallowed
from cbfgen.oracle import brute_force_allowed, enumerate_tree
from cbfgen.pipeline import FilterKind, GenerationConfig, run_batch
from cbfgen.predictor import predict
from cbfgen.synthetic import desk_fixture

SPECS_DIR = Path(__file__).resolve().parent.parent / "specs"


def report(name, passed, detail=""):
    print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    assert passed, f"{name}: {detail}"


def test_safety_invariant_1000_runs():
    """h(x(k)) >= (1 - alpha)^k h(x0) - 1e-9 and h(x(k)) >= -1e-9, under 30 s."""
    vocab, predictor, constraint, initial = desk_fixture(50, seed=7)
    h0 = constraint.evaluate(initial)
    assert h0 >= 0
    started = time.monotonic()
    violations = 0
    runs = 0
    logged = 0
    for alpha in (0.3, 0.8):
        cfg = GenerationConfig(
            vocab=vocab,
            initial_text=initial,
            filter_kind=FilterKind.CBF,
            alpha=alpha,
            k_top=8,
            max_new_tokens=30,
            seed=0,
        )
        batch = run_batch(predictor, constraint, cfg, n_samples=500, base_seed=0)
        assert not batch.failures
        for record in batch.completed:
            runs += 1
            for step in record.steps:
                logged += 1
                bound = (1 - alpha) ** (step.k + 1) * h0
                if step.h_value < bound - 1e-9 or step.h_value < -1e-9:
                    violations += 1
    elapsed = time.monotonic() - started
    report(
        "safety-invariant",
        violations == 0 and runs == 1000 and elapsed < 30.0,
        f"{runs} runs, {logged} logged h values, {violations} violations, "
        f"{elapsed:.1f}s",
    )


def test_oracle_equivalence_exhaustive():
    """Brute-force barrier evaluation matches the filter at every reachable text."""
    mismatches = 0
    instances = 0
    for n in (3, 5, 8):
        vocab, predictor, constraint, initial = desk_fixture(n, seed=3)
        texts = enumerate_tree(initial, n, depth=3)
        for alpha in (0.0, 0.3, 0.8, 1.0):
            for text in texts:
                probs = predict(predictor, text)
                oracle = brute_force_allowed(probs, text, constraint, alpha, n)
                try:
                    _, decision = cbf_filter(
                        probs, text, constraint, CbfConfig(alpha=alpha, k_top=n)
                    )
                    got = {c.token for c in decision.candidates if c.allowed}
                except FilterStalled:
                    got = set()
                instances += 1
                if got != oracle:
                    mismatches += 1
    report(
        "oracle-equivalence",
        mismatches == 0,
        f"{instances} (text, alpha) instances across N in (3, 5, 8), depth 3, "
        f"{mismatches} mismatches",
    )


def test_blacklist_equals_cbf_alpha_one_10000():
    """Identical filtered vectors and decisions on 10,000 random instances."""
    rng = np.random.Generator(np.random.PCG64(2024))
    mismatches = 0
    for _ in range(10_000):
        n = int(rng.integers(2, 10))
        probs = normalize(rng.random(n) + 1e-9)
        weights = {t: float(rng.uniform(-0.6, 0.6)) for t in range(1, n + 1)}
        constraint = NumericConstraint(weights, bias=float(rng.uniform(-0.3, 0.9)))
        text = Text([int(rng.integers(1, n + 1))])
        k_top = int(rng.integers(1, n + 1))
        try:
            out_b, dec_b = blacklist_filter(probs, text, constraint, k_top)
            stall_b = False
        except FilterStalled as e:
            out_b, dec_b, stall_b = None, e.decision, True
        try:
            out_c, dec_c = cbf_filter(
                probs, text, constraint, CbfConfig(alpha=1.0, k_top=k_top)
            )
            stall_c = False
        except FilterStalled as e:
            out_c, dec_c, stall_c = None, e.decision, True
        identical = stall_b == stall_c and dec_b == dec_c
        if identical and not stall_b:
            identical = bool(np.array_equal(out_b, out_c))
        if not identical:
            mismatches += 1
    report(
        "blacklist-equals-cbf-alpha-1",
        mismatches == 0,
        f"10000 instances, {mismatches} mismatches (zero tolerance)",
    )


def test_nocontrol_mean_disallowed_is_exactly_zero():
    vocab, predictor, constraint, initial = desk_fixture(50, seed=7)
    cfg = GenerationConfig(
        vocab=vocab,
        initial_text=initial,
        filter_kind=FilterKind.NOCONTROL,
        k_top=8,
        max_new_tokens=30,
        seed=0,
    )
    batch = run_batch(predictor, constraint, cfg, n_samples=100, base_seed=0)
    counts = [count_disallowed(r.all_decisions()) for r in batch.completed]
    mean = sum(counts) / len(counts)
    report(
        "nocontrol-zero-disallowed",
        mean == 0.0 and len(counts) == 100,
        f"mean disallowed over {len(counts)} runs = {mean}",
    )


def test_alpha_ordering_per_step():
    """allowed(0.3) subset of allowed(0.8) subset of allowed(1.0) at every step.

    Checked with k_top = N so the scan is never truncated; truncated scans do
    not guarantee set inclusion (a stricter alpha scans deeper).
    """
    vocab, predictor, constraint, initial = desk_fixture(50, seed=7)
    cfg = GenerationConfig(
        vocab=vocab,
        initial_text=initial,
        filter_kind=FilterKind.CBF,
        alpha=0.8,
        k_top=8,
        max_new_tokens=30,
        seed=0,
    )
    batch = run_batch(predictor, constraint, cfg, n_samples=20, base_seed=5)
    steps_checked = 0
    ordered = 0
    for record in batch.completed:
        for i in range(len(record.steps)):
            text = record.text_at(i)
            probs = predict(predictor, text)
            sets = []
            for alpha in (0.3, 0.8, 1.0):
                try:
                    _, decision = cbf_filter(
                        probs, text, constraint,
                        CbfConfig(alpha=alpha, k_top=vocab.size),
                    )
                    sets.append({c.token for c in decision.candidates if c.allowed})
                except FilterStalled:
                    sets.append(set())
            steps_checked += 1
            if sets[0] <= sets[1] <= sets[2]:
                ordered += 1
    report(
        "alpha-ordering",
        steps_checked > 0 and ordered == steps_checked,
        f"{ordered}/{steps_checked} steps satisfy allowed(0.3) "
        f"⊆ allowed(0.8) ⊆ allowed(1.0)",
    )


def test_determinism_of_shipped_spec(tmp_path):
    """Repeated execution of the shipped spec yields byte-identical artifacts."""
    spec_path = SPECS_DIR / "synthetic.json"
    outs = []
    for sub in ("first", "second"):
        spec = load_spec(spec_path)
        outcome = run_experiment(spec, tmp_path / sub, parallel=2)
        assert not outcome.failed
        outs.append(tmp_path / sub)
    names_a = sorted(p.name for p in outs[0].iterdir())
    names_b = sorted(p.name for p in outs[1].iterdir())
    identical = names_a == names_b and all(
        (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
        for name in names_a
    )
    report(
        "artifact-determinism",
        identical,
        f"{len(names_a)} files byte-compared across two runs",
    )


def test_histogram_conservation_every_batch():
    """Histogram mass equals total scanned candidates for each filter's batch."""
    from cbfgen.analysis import attractor_histogram

    vocab, predictor, constraint, initial = desk_fixture(50, seed=7)
    mismatched = []
    for kind, alpha in (
        (FilterKind.NOCONTROL, None),
        (FilterKind.BLACKLIST, None),
        (FilterKind.CBF, 0.8),
        (FilterKind.CBF, 0.3),
    ):
        cfg = GenerationConfig(
            vocab=vocab,
            initial_text=initial,
            filter_kind=kind,
            alpha=alpha,
            k_top=8,
            max_new_tokens=30,
            seed=0,
        )
        batch = run_batch(predictor, constraint, cfg, n_samples=25, base_seed=0)
        records = batch.completed
        scanned = sum(d.scanned for r in records for d in r.all_decisions())
        total = attractor_histogram(records).total
        if total != scanned:
            mismatched.append(f"{kind.value}(alpha={alpha}): {total} != {scanned}")
    report(
        "histogram-conservation",
        not mismatched,
        "; ".join(mismatched) if mismatched else
        "mass equals scanned candidates for all four filter batches",
    )
