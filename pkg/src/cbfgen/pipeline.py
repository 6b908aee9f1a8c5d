"""The closed generation loop: predict, filter, normalize, sample, append.

Each step produces one token and one audit record. A run is a pure function
of (predictor, constraint, config): the only randomness is the per-run seeded
generator consumed by the token selector, so identical inputs replay to
bit-identical trajectories.
"""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .constraint import ConstraintFunction
from .core import Text, Vocabulary, concat, normalize
from .errors import FilterStalled, NormalizationError
from .filters import CbfConfig, FilterDecision, blacklist_filter, cbf_filter, nocontrol_filter
from .predictor import LogitSource, predict

logger = logging.getLogger(__name__)


class FilterKind(enum.Enum):
    NOCONTROL = "nocontrol"
    BLACKLIST = "blacklist"
    CBF = "cbf"


class StallPolicy(enum.Enum):
    """What a stalled filter means for the run.

    END_SEQUENCE treats the stall like reaching the end of the sequence: the
    partial text is kept and the run is a normal record. ABORT also keeps the
    partial record (no exception either way) but run_batch additionally marks
    the sample as failed, for strict experiments where a stall must surface
    in exit status.
    """

    ABORT = "abort"
    END_SEQUENCE = "end_sequence"


class Termination(enum.Enum):
    MAX_TOKENS = "max_tokens"
    EOS = "eos"
    STALLED = "stalled"


@dataclass(frozen=True)
class GenerationConfig:
    """Everything one generation run depends on besides the models."""

    vocab: Vocabulary
    initial_text: Text
    filter_kind: FilterKind
    k_top: int
    max_new_tokens: int
    seed: int
    temperature: float = 1.0
    alpha: float | None = None
    max_scan: int | None = None
    stall_policy: StallPolicy = StallPolicy.END_SEQUENCE

    def __post_init__(self):
        if self.max_new_tokens < 1:
            raise ValueError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed}")
        if self.k_top < 1 or self.k_top > self.vocab.size:
            raise ValueError(
                f"k_top must be in [1, {self.vocab.size}], got {self.k_top}"
            )
        for t in self.initial_text:
            self.vocab.require(t)
        if self.filter_kind is FilterKind.CBF:
            if self.alpha is None:
                raise ValueError("alpha is required for the cbf filter")
            CbfConfig(alpha=self.alpha, k_top=self.k_top, max_scan=self.max_scan)
        elif self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class StepRecord:
    """One accepted token: index k, the choice, h of the new text, its delta."""

    k: int
    token: int
    h_value: float
    delta_h: float
    decision: FilterDecision


@dataclass(frozen=True)
class TrajectoryRecord:
    """Full log of one generation run."""

    steps: tuple[StepRecord, ...]
    final_text: Text
    termination: Termination
    filter_kind: FilterKind
    h_initial: float
    seed: int
    stall_decision: FilterDecision | None = None

    def all_decisions(self) -> tuple[FilterDecision, ...]:
        """Decisions of accepted steps plus the stalled scan, if any."""
        decisions = tuple(s.decision for s in self.steps)
        if self.stall_decision is not None:
            decisions = decisions + (self.stall_decision,)
        return decisions

    def text_at(self, k: int) -> Text:
        """The text after k accepted steps (k = 0 is the initial text)."""
        initial_len = len(self.final_text) - len(self.steps)
        return self.final_text.prefix(initial_len + k)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def select_token(q: np.ndarray, rng: np.random.Generator) -> int:
    """Sample a token id from a normalized vector by inverse CDF.

    The cumulative sum runs over tokens in ascending id order; the draw
    advances the generator state by exactly one uniform.
    """
    u = rng.random()
    cdf = np.cumsum(q)
    idx = int(np.searchsorted(cdf, u, side="right"))
    if idx >= q.shape[0] or q[idx] == 0.0:
        # u landed at or past the accumulated total (float shortfall, or on a
        # trailing zero-probability plateau); fall back to the last positive entry
        idx = int(np.max(np.nonzero(q)[0]))
    return idx + 1


def _apply_filter(
    cfg: GenerationConfig,
    probs: np.ndarray,
    text: Text,
    constraint: ConstraintFunction,
    step: int,
) -> tuple[np.ndarray, FilterDecision]:
    if cfg.filter_kind is FilterKind.NOCONTROL:
        return nocontrol_filter(
            probs, cfg.k_top, step=step, constraint=constraint, text=text
        )
    if cfg.filter_kind is FilterKind.BLACKLIST:
        return blacklist_filter(
            probs, text, constraint, cfg.k_top, max_scan=cfg.max_scan, step=step
        )
    fcfg = CbfConfig(alpha=cfg.alpha, k_top=cfg.k_top, max_scan=cfg.max_scan)
    return cbf_filter(probs, text, constraint, fcfg, step=step)


def generate(
    predictor: LogitSource,
    constraint: ConstraintFunction,
    cfg: GenerationConfig,
) -> TrajectoryRecord:
    """Run one generation to termination and return its trajectory.

    Stalls never raise: the run ends with termination = STALLED and the
    stalling scan attached. Constraint and transport errors propagate.
    """
    rng = make_rng(cfg.seed)
    text = cfg.initial_text
    h_prev = constraint.evaluate(text)
    h_initial = h_prev
    if cfg.filter_kind is not FilterKind.NOCONTROL and h_prev < 0:
        logger.warning(
            "initial text starts outside the desirable set (h = %.6g); the "
            "barrier condition will steer h toward zero geometrically",
            h_prev,
        )

    steps: list[StepRecord] = []
    termination = Termination.MAX_TOKENS
    stall_decision: FilterDecision | None = None
    for k in range(cfg.max_new_tokens):
        probs = predict(predictor, text, cfg.temperature)
        try:
            filtered, decision = _apply_filter(cfg, probs, text, constraint, k)
            q = normalize(filtered)
        except FilterStalled as stall:
            termination = Termination.STALLED
            stall_decision = stall.decision
            break
        except NormalizationError:
            # every allowed token carried zero prior probability
            termination = Termination.STALLED
            break
        chosen = select_token(q, rng)
        text = concat(text, chosen, cfg.vocab)
        h_new = constraint.evaluate(text)
        steps.append(StepRecord(k, chosen, h_new, h_new - h_prev, decision))
        h_prev = h_new
        if chosen in cfg.vocab.eos_tokens:
            termination = Termination.EOS
            break

    return TrajectoryRecord(
        steps=tuple(steps),
        final_text=text,
        termination=termination,
        filter_kind=cfg.filter_kind,
        h_initial=h_initial,
        seed=cfg.seed,
        stall_decision=stall_decision,
    )


@dataclass(frozen=True)
class BatchResult:
    """Outcome of run_batch: per-sample records plus failure accounting.

    ``failures`` maps sample index to the failure reason. A stall counts as a
    failure only under StallPolicy.ABORT; exceptions from the constraint or
    transport always do.
    """

    records: tuple[TrajectoryRecord | None, ...]
    failures: dict[int, str] = field(default_factory=dict)

    @property
    def completed(self) -> tuple[TrajectoryRecord, ...]:
        return tuple(r for r in self.records if r is not None)

    @property
    def stall_count(self) -> int:
        return sum(
            1 for r in self.records
            if r is not None and r.termination is Termination.STALLED
        )


def run_batch(
    predictor: LogitSource,
    constraint: ConstraintFunction,
    cfg: GenerationConfig,
    n_samples: int,
    base_seed: int,
    max_workers: int = 1,
) -> BatchResult:
    """Generate ``n_samples`` runs; sample i uses seed ``base_seed + i``.

    Results are ordered by sample index and independent of worker
    interleaving. Individual failures are recorded and the batch continues.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")

    def one(i: int) -> tuple[TrajectoryRecord | None, str | None]:
        try:
            record = generate(predictor, constraint, replace(cfg, seed=base_seed + i))
        except Exception as exc:  # noqa: BLE001 - per-sample isolation is the contract
            return None, f"{type(exc).__name__}: {exc}"
        if (
            record.termination is Termination.STALLED
            and cfg.stall_policy is StallPolicy.ABORT
        ):
            return record, "FilterStalled: run aborted by stall policy"
        return record, None

    if max_workers <= 1:
        outcomes = [one(i) for i in range(n_samples)]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(one, range(n_samples)))

    records = tuple(rec for rec, _ in outcomes)
    failures = {i: err for i, (_, err) in enumerate(outcomes) if err is not None}
    return BatchResult(records=records, failures=failures)
