"""Experiment specs: a JSON file describing predictor, constraint, generation
settings, and a roster of filters to run against the same inputs.

The runner executes one batch per filter and writes, per filter label,
``{label}_trajectories.csv``, ``{label}_fan.csv``, ``{label}_histogram.json``
and ``{label}_report.json``, plus a combined ``report.json``. Identical spec
and seeds produce byte-identical artifacts.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .analysis import (
    FAN_COLUMNS,
    TRAJECTORY_COLUMNS,
    FilterReport,
    HistogramSpec,
    attractor_histogram,
    fan_table,
    report_payload,
    summarize,
    trajectory_table,
    write_csv,
    write_json,
)
from .bridge_client import RemotePredictor, RemoteScorer, resolve_endpoint
from .constraint import (
    ClassifierConstraint,
    ConstraintFunction,
    NumericConstraint,
)
from .core import Text, Vocabulary
from .errors import SpecValidationError
from .pipeline import (
    FilterKind,
    GenerationConfig,
    StallPolicy,
    run_batch,
)
from .predictor import NgramPredictor, TablePredictor
from .synthetic import make_synthetic_corpus, make_synthetic_weights

_LABEL_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


@dataclass(frozen=True)
class FilterSpec:
    label: str
    kind: FilterKind
    alpha: float | None


@dataclass
class ExperimentSpec:
    vocab: Vocabulary
    predictor: Any
    constraint: ConstraintFunction
    generation: GenerationConfig
    filters: list[FilterSpec]
    samples: int
    base_seed: int
    histogram: HistogramSpec


def _fail(field: str, message: str) -> SpecValidationError:
    return SpecValidationError(f"{field}: {message}")


def _require(data: dict, field: str, prefix: str):
    if field not in data:
        raise _fail(f"{prefix}{field}", "missing required field")
    return data[field]


def _build_predictor(data: dict, vocab: Vocabulary | None):
    kind = _require(data, "kind", "predictor.")
    if kind == "table":
        entries = _require(data, "entries", "predictor.")
        default = _require(data, "default", "predictor.")
        table = {tuple(e["suffix"]): e["logits"] for e in entries}
        return TablePredictor(table, default)
    if kind == "ngram":
        if vocab is None:
            raise _fail("vocabulary", "required for an ngram predictor")
        if "corpus" in data:
            corpus = data["corpus"]
        else:
            corpus = make_synthetic_corpus(
                vocab.size,
                n_texts=data.get("corpus_texts", 20),
                length=data.get("corpus_length", 40),
                seed=data.get("corpus_seed", 7),
            )
        try:
            return NgramPredictor(
                corpus,
                vocab.size,
                order=data.get("order", 2),
                smoothing=data.get("smoothing", 0.01),
            )
        except ValueError as exc:
            raise _fail("predictor", str(exc))
    if kind == "remote":
        endpoint = resolve_endpoint(data.get("endpoint"))
        return RemotePredictor(endpoint, top_logits=data.get("top_logits", 100))
    raise _fail("predictor.kind", f"unknown predictor kind {kind!r}")


def _build_constraint(data: dict, vocab: Vocabulary | None) -> ConstraintFunction:
    kind = _require(data, "kind", "constraint.")
    if kind == "numeric":
        if "weights" in data:
            try:
                weights = {int(t): float(w) for t, w in data["weights"].items()}
            except (TypeError, ValueError) as exc:
                raise _fail("constraint.weights", f"invalid weight map: {exc}")
        else:
            if vocab is None:
                raise _fail("vocabulary", "required for seeded constraint weights")
            weights = make_synthetic_weights(
                vocab.size,
                spread=data.get("weights_spread", 0.2),
                seed=data.get("weights_seed", 11),
            )
        return NumericConstraint(weights, bias=data.get("bias", 0.0))
    if kind == "remote":
        endpoint = resolve_endpoint(data.get("endpoint"))
        return ClassifierConstraint(RemoteScorer(endpoint))
    raise _fail("constraint.kind", f"unknown constraint kind {kind!r}")


def _build_filters(data: list) -> list[FilterSpec]:
    if not isinstance(data, list) or not data:
        raise _fail("filters", "must be a non-empty list")
    out = []
    seen = set()
    for i, entry in enumerate(data):
        prefix = f"filters[{i}]."
        label = str(_require(entry, "label", prefix))
        if not _LABEL_RE.match(label):
            raise _fail(f"{prefix}label", f"invalid label {label!r}")
        if label in seen:
            raise _fail(f"{prefix}label", f"duplicate label {label!r}")
        seen.add(label)
        kind_raw = _require(entry, "kind", prefix)
        try:
            kind = FilterKind(kind_raw)
        except ValueError:
            raise _fail(f"{prefix}kind", f"unknown filter kind {kind_raw!r}")
        alpha = entry.get("alpha")
        if kind is FilterKind.CBF:
            if alpha is None:
                raise _fail(f"{prefix}alpha", "required for a cbf filter")
            if not isinstance(alpha, (int, float)) or not 0.0 <= alpha <= 1.0:
                raise _fail(f"{prefix}alpha", f"must be in [0, 1], got {alpha}")
        out.append(FilterSpec(label=label, kind=kind, alpha=alpha))
    return out


def load_spec(path: str | Path, seed_override: int | None = None) -> ExperimentSpec:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SpecValidationError(f"{path}: not valid JSON ({exc})")

    vocab = None
    if "vocabulary" in raw:
        vdata = raw["vocabulary"]
        try:
            vocab = Vocabulary(
                size=_require(vdata, "size", "vocabulary."),
                eos_tokens=frozenset(vdata.get("eos_tokens", [])),
            )
        except ValueError as exc:
            raise _fail("vocabulary", str(exc))

    predictor = _build_predictor(_require(raw, "predictor", ""), vocab)

    if vocab is None:
        if isinstance(predictor, RemotePredictor):
            vocab = Vocabulary(
                size=predictor.vocab_size,
                eos_tokens=frozenset(predictor.eos_tokens),
            )
        else:
            raise _fail("vocabulary", "required unless the predictor is remote")
    elif isinstance(predictor, RemotePredictor):
        predictor.check_vocabulary(vocab)

    constraint = _build_constraint(_require(raw, "constraint", ""), vocab)
    filters = _build_filters(_require(raw, "filters", ""))

    gdata = _require(raw, "generation", "")
    if "initial_text" in gdata:
        try:
            initial = Text(gdata["initial_text"])
        except (TypeError, ValueError) as exc:
            raise _fail("generation.initial_text", str(exc))
    elif "initial_prompt" in gdata:
        if not isinstance(predictor, RemotePredictor):
            raise _fail(
                "generation.initial_prompt",
                "a natural-language prompt needs a remote predictor to encode it",
            )
        initial = Text(predictor._client.encode(gdata["initial_prompt"]))
    else:
        raise _fail("generation", "needs initial_text or initial_prompt")

    k_top = gdata.get("k_top", 30)
    if isinstance(predictor, RemotePredictor) and k_top > predictor.top_logits:
        raise _fail(
            "generation.k_top",
            f"k_top ({k_top}) exceeds the remote predictor's top_logits "
            f"({predictor.top_logits})",
        )
    stall_raw = gdata.get("stall_policy", "end_sequence")
    try:
        stall_policy = StallPolicy(stall_raw)
    except ValueError:
        raise _fail("generation.stall_policy", f"unknown policy {stall_raw!r}")

    samples = raw.get("samples", 100)
    if not isinstance(samples, int) or samples < 1:
        raise _fail("samples", f"must be a positive integer, got {samples!r}")
    base_seed = raw.get("base_seed", 0)
    if seed_override is not None:
        base_seed = seed_override
    if not isinstance(base_seed, int) or base_seed < 0:
        raise _fail("base_seed", f"must be a non-negative integer, got {base_seed!r}")

    hdata = raw.get("histogram", {})
    try:
        histogram = HistogramSpec(
            h_range=tuple(hdata.get("h_range", (-1.0, 1.0))),
            dh_range=tuple(hdata.get("dh_range", (-1.0, 1.0))),
            bins_h=hdata.get("bins_h", 61),
            bins_dh=hdata.get("bins_dh", 61),
        )
    except ValueError as exc:
        raise _fail("histogram", str(exc))

    # one GenerationConfig per filter is derived later; validate shared fields now
    try:
        generation = GenerationConfig(
            vocab=vocab,
            initial_text=initial,
            filter_kind=FilterKind.NOCONTROL,
            k_top=k_top,
            max_new_tokens=gdata.get("max_new_tokens", 30),
            seed=base_seed,
            temperature=gdata.get("temperature", 1.0),
            max_scan=gdata.get("max_scan"),
            stall_policy=stall_policy,
        )
    except ValueError as exc:
        raise _fail("generation", str(exc))

    return ExperimentSpec(
        vocab=vocab,
        predictor=predictor,
        constraint=constraint,
        generation=generation,
        filters=filters,
        samples=samples,
        base_seed=base_seed,
        histogram=histogram,
    )


@dataclass(frozen=True)
class ExperimentOutcome:
    report_paths: dict[str, Path]
    failures: dict[str, dict[int, str]]
    summary_lines: list[str]

    @property
    def failed(self) -> bool:
        return any(self.failures.values())


def run_experiment(
    spec: ExperimentSpec,
    out_dir: str | Path,
    parallel: int = 1,
) -> ExperimentOutcome:
    """Run every filter in the spec and write all artifact files."""
    from dataclasses import replace

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    report_paths: dict[str, Path] = {}
    failures: dict[str, dict[int, str]] = {}
    combined = {"filters": []}
    summary_lines = [
        f"{'filter':<20} {'runs':>6} {'mean_disallowed':>16} {'stalls':>7} {'failures':>9}"
    ]
    for fspec in spec.filters:
        cfg = replace(
            spec.generation, filter_kind=fspec.kind, alpha=fspec.alpha
        )
        batch = run_batch(
            spec.predictor,
            spec.constraint,
            cfg,
            n_samples=spec.samples,
            base_seed=spec.base_seed,
            max_workers=parallel,
        )
        records = batch.completed
        failures[fspec.label] = batch.failures

        write_csv(
            out / f"{fspec.label}_trajectories.csv",
            trajectory_table(records),
            TRAJECTORY_COLUMNS,
        )
        write_csv(out / f"{fspec.label}_fan.csv", fan_table(records), FAN_COLUMNS)

        if records:
            freport = summarize({fspec.label: records}, spec.histogram).per_filter[
                fspec.label
            ]
        else:
            freport = FilterReport(
                filter_label=fspec.label,
                runs=0,
                mean_disallowed=0.0,
                stalls=0,
                per_run_disallowed=(),
                histogram=attractor_histogram((), spec.histogram),
            )
        payload = report_payload(freport)
        write_json(out / f"{fspec.label}_histogram.json", payload["histogram"])
        write_json(out / f"{fspec.label}_report.json", payload)
        report_paths[fspec.label] = out / f"{fspec.label}_report.json"
        combined["filters"].append(payload)
        summary_lines.append(
            f"{fspec.label:<20} {freport.runs:>6} {freport.mean_disallowed:>16.2f} "
            f"{freport.stalls:>7} {len(batch.failures):>9}"
        )
    write_json(out / "report.json", combined)
    return ExperimentOutcome(
        report_paths=report_paths,
        failures=failures,
        summary_lines=summary_lines,
    )
