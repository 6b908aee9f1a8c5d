"""Experiment-shape checks through the bridge.

The desk-scale test drives the full experiment machinery (spec file, remote
predictor, remote scorer, /encode for the prompt) against the tiny in-process
models and asserts the qualitative shape of the results: barrier-filtered
runs never leave the desirable set when they start inside it, the barrier
filters reject tokens, and the unfiltered baseline rejects none.

The real-model variant replays the shipped full-size spec against a live
bridge serving the documented model pair. That needs GPU-class hardware and
downloaded weights, so it only runs when CBFGEN_PAPER_BRIDGE points at such
a server.
"""

import json
import os
from pathlib import Path

import pytest

from cbfgen.analysis import read_json
from cbfgen.experiment import load_spec, run_experiment

from test_integration import LiveServer

REPO_ROOT = Path(__file__).resolve().parents[2]
PAPER_SPEC = REPO_ROOT / "specs" / "paper.json"


def desk_scale_payload(endpoint):
    return {
        "predictor": {"kind": "remote", "endpoint": endpoint, "top_logits": 64},
        "constraint": {"kind": "remote", "endpoint": endpoint},
        "generation": {
            "initial_prompt": "w3 w14 w27",
            "temperature": 1.0,
            "k_top": 8,
            "max_new_tokens": 10,
            "stall_policy": "end_sequence",
        },
        "filters": [
            {"label": "nocontrol", "kind": "nocontrol"},
            {"label": "blacklist", "kind": "blacklist"},
            {"label": "cbf_alpha_0.8", "kind": "cbf", "alpha": 0.8},
            {"label": "cbf_alpha_0.3", "kind": "cbf", "alpha": 0.3},
        ],
        "samples": 6,
        "base_seed": 0,
    }


def assert_experiment_shape(out_dir, barrier_labels, nocontrol_label="nocontrol",
                            require_interventions=True):
    from cbfgen.analysis import read_csv

    nocontrol = read_json(out_dir / f"{nocontrol_label}_report.json")
    assert nocontrol["mean_disallowed"] == 0.0

    for label in barrier_labels:
        report = read_json(out_dir / f"{label}_report.json")
        if require_interventions:
            assert report["mean_disallowed"] > 0.0, label
        rows = read_csv(out_dir / f"{label}_trajectories.csv")
        assert rows, label
        for row in rows:
            assert row["h"] >= -1e-9, (label, row)


def test_desk_scale_experiment_through_bridge(tmp_path, monkeypatch):
    with LiveServer() as live:
        monkeypatch.setenv("CBFGEN_BRIDGE_URL", live.endpoint)
        spec_path = tmp_path / "desk.json"
        spec_path.write_text(json.dumps(desk_scale_payload(live.endpoint)))
        spec = load_spec(spec_path)
        assert spec.constraint.evaluate(spec.generation.initial_text) >= 0
        outcome = run_experiment(spec, tmp_path / "out", parallel=1)
        assert not outcome.failed
    for label in ("nocontrol", "blacklist", "cbf_alpha_0.8", "cbf_alpha_0.3"):
        assert (tmp_path / "out" / f"{label}_report.json").exists()
    assert_experiment_shape(
        tmp_path / "out", ["blacklist", "cbf_alpha_0.8", "cbf_alpha_0.3"]
    )


@pytest.mark.skipif(
    not os.environ.get("CBFGEN_PAPER_BRIDGE"),
    reason="needs a live bridge serving the full-size model pair "
    "(set CBFGEN_PAPER_BRIDGE to its URL)",
)
def test_real_models_qualitative(tmp_path, monkeypatch):
    monkeypatch.setenv("CBFGEN_BRIDGE_URL", os.environ["CBFGEN_PAPER_BRIDGE"])
    spec = load_spec(PAPER_SPEC)
    outcome = run_experiment(spec, tmp_path / "out", parallel=2)
    assert not outcome.failed
    assert_experiment_shape(
        tmp_path / "out", ["blacklist", "cbf_alpha_0.8", "cbf_alpha_0.3"]
    )
