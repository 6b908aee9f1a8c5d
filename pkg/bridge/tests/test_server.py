import math

import pytest
import torch

from cbfgen_bridge.models import classifier_scores, generator_logits


class TestMeta:
    def test_reports_configured_vocab(self, client, bundle):
        body = client.get("/meta").json()
        assert body["vocab_size"] == bundle.generator.config.vocab_size == 64
        assert body["eos_tokens"] == [bundle.generator.config.eos_token_id + 1]


class TestLogits:
    def test_matches_direct_forward_pass(self, client, bundle):
        """Server-path logits equal an in-process forward pass within 1e-4."""
        tokens = [3, 17, 42, 9]
        body = client.post("/logits", json={"tokens": tokens, "top_m": 64}).json()
        direct = generator_logits(bundle, tokens)
        assert body["vocab_size"] == 64
        assert len(body["entries"]) == 64
        for entry in body["entries"]:
            expected = float(direct[entry["token"] - 1])
            assert entry["logit"] == pytest.approx(expected, abs=1e-4)

    def test_entries_sorted_descending(self, client):
        body = client.post("/logits", json={"tokens": [5, 6], "top_m": 10}).json()
        logits = [e["logit"] for e in body["entries"]]
        assert logits == sorted(logits, reverse=True)
        assert len(body["entries"]) == 10

    def test_top_one_is_argmax(self, client, bundle):
        tokens = [8, 2]
        body = client.post("/logits", json={"tokens": tokens, "top_m": 1}).json()
        direct = generator_logits(bundle, tokens)
        assert len(body["entries"]) == 1
        assert body["entries"][0]["token"] == int(torch.argmax(direct)) + 1

    def test_deterministic_bytes(self, client):
        payload = {"tokens": [1, 2, 3], "top_m": 16}
        a = client.post("/logits", json=payload)
        b = client.post("/logits", json=payload)
        assert a.content == b.content

    def test_invalid_token_is_400(self, client):
        for bad in (0, 65, -3):
            resp = client.post("/logits", json={"tokens": [1, bad], "top_m": 4})
            assert resp.status_code == 400
            assert "token id" in resp.json()["detail"]

    def test_empty_tokens_uses_bos(self, client):
        resp = client.post("/logits", json={"tokens": [], "top_m": 4})
        assert resp.status_code == 200
        assert len(resp.json()["entries"]) == 4

    def test_overlong_sequence_is_400(self, client):
        resp = client.post("/logits", json={"tokens": [1] * 200, "top_m": 4})
        assert resp.status_code == 400

    def test_top_m_clamped_to_vocab(self, client):
        body = client.post("/logits", json={"tokens": [1], "top_m": 500}).json()
        assert len(body["entries"]) == 64


class TestScores:
    def test_triples_sum_to_one(self, client):
        body = client.post(
            "/scores", json={"texts": [[1, 2, 3], [9, 9], [50]]}
        ).json()
        assert len(body["scores"]) == 3
        for triple in body["scores"]:
            assert len(triple) == 3
            assert sum(triple) == pytest.approx(1.0, abs=1e-6)
            assert all(0.0 <= v <= 1.0 for v in triple)

    def test_matches_direct_classifier_call(self, client, bundle):
        texts = [[4, 8, 15], [16, 23, 42]]
        body = client.post("/scores", json={"texts": texts}).json()
        direct, _ = classifier_scores(bundle, texts)
        for got, expected in zip(body["scores"], direct):
            assert got == pytest.approx(expected, abs=1e-6)

    def test_batch_order_preserved(self, client):
        texts = [[i + 1] for i in range(6)]
        body = client.post("/scores", json={"texts": texts}).json()
        singles = [
            client.post("/scores", json={"tokens": t}).json()["scores"][0]
            for t in texts
        ]
        assert body["scores"] == singles

    def test_tokens_form_accepted(self, client):
        body = client.post("/scores", json={"tokens": [1, 2]}).json()
        assert len(body["scores"]) == 1

    def test_long_text_truncates_from_left_and_flags(self, client, bundle):
        long_text = list(range(1, 61))  # 60 tokens > classifier budget of 24
        body = client.post("/scores", json={"texts": [long_text]}).json()
        assert body["truncated"] == [True]
        # truncation keeps the most recent content: scoring just the tail
        # reproduces the same triple
        tail = long_text[-bundle.classifier_max_tokens:]
        tail_body = client.post("/scores", json={"texts": [tail]}).json()
        assert body["scores"][0] == pytest.approx(tail_body["scores"][0], abs=1e-6)
        assert tail_body["truncated"] == [False]

    def test_neither_texts_nor_tokens_is_400(self, client):
        assert client.post("/scores", json={}).status_code == 400

    def test_invalid_token_is_400(self, client):
        resp = client.post("/scores", json={"texts": [[1, 99]]})
        assert resp.status_code == 400


class TestEncode:
    def test_round_trips_known_words(self, client):
        body = client.post(
            "/encode", json={"text": "w4 w8 w15", "add_special_tokens": False}
        ).json()
        assert body["tokens"] == [5, 9, 16]  # wire ids are 1-based

    def test_deterministic(self, client):
        a = client.post("/encode", json={"text": "w1 w2"})
        b = client.post("/encode", json={"text": "w1 w2"})
        assert a.content == b.content


class TestProtocolRoundTrip:
    def test_logits_request_response_shape(self, client):
        body = client.post("/logits", json={"tokens": [2, 3], "top_m": 5}).json()
        assert set(body) == {"entries", "vocab_size"}
        assert all(set(e) == {"token", "logit"} for e in body["entries"])
        assert all(
            isinstance(e["token"], int) and 1 <= e["token"] <= body["vocab_size"]
            for e in body["entries"]
        )
        assert all(math.isfinite(e["logit"]) for e in body["entries"])

    def test_scores_response_shape(self, client):
        body = client.post("/scores", json={"texts": [[1], [2]]}).json()
        assert set(body) == {"scores", "truncated"}
        assert len(body["truncated"]) == 2
