"""Client side of the inference-bridge wire protocol.

The bridge is a separate HTTP service exposing three JSON endpoints:

    GET  /meta    -> {"vocab_size": int, "eos_tokens": [int]}
    POST /logits  {"tokens": [int], "top_m": int}
                  -> {"entries": [{"token": int, "logit": float}], "vocab_size": int}
    POST /scores  {"texts": [[int], ...]}
                  -> {"scores": [[neg, neu, pos], ...], "truncated": [bool, ...]}

Token ids on the wire are 1-based, matching the rest of the package. Requests
are retried on transport failure (3 attempts, exponential backoff starting at
100 ms); malformed responses raise ProtocolError without retrying.
"""

from __future__ import annotations

import os
import threading
import time
from typing import Sequence

import numpy as np
import requests

from .constraint import ClassScores
from .core import Text, Vocabulary
from .errors import ProtocolError, RemoteError
from .predictor import SENTINEL_LOGIT

ENDPOINT_ENV_VAR = "CBFGEN_BRIDGE_URL"

MAX_ATTEMPTS = 3
BASE_DELAY_S = 0.1


def resolve_endpoint(endpoint: str | None) -> str:
    """Apply the environment override, if set."""
    override = os.environ.get(ENDPOINT_ENV_VAR)
    resolved = override or endpoint
    if not resolved:
        raise ValueError(
            f"no bridge endpoint configured (set {ENDPOINT_ENV_VAR} or pass one)"
        )
    return resolved.rstrip("/")


class BridgeClient:
    """Thin retrying JSON client for one bridge endpoint."""

    def __init__(self, endpoint: str, timeout: float = 30.0,
                 base_delay: float = BASE_DELAY_S):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.base_delay = base_delay
        self._session = requests.Session()
        # requests.Session is not guaranteed thread-safe; batch runs share one
        # client across workers, so serialize access
        self._lock = threading.Lock()

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        url = f"{self.endpoint}{path}"
        last_error: Exception | None = None
        for attempt in range(MAX_ATTEMPTS):
            if attempt:
                time.sleep(self.base_delay * 2 ** (attempt - 1))
            try:
                with self._lock:
                    response = self._session.request(
                        method, url, json=payload, timeout=self.timeout
                    )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = RemoteError(
                    f"{url} returned {response.status_code}: {response.text[:200]}"
                )
                continue
            if response.status_code != 200:
                raise ProtocolError(
                    f"{url} returned {response.status_code}: {response.text[:200]}"
                )
            try:
                return response.json()
            except ValueError as exc:
                raise ProtocolError(f"{url} returned non-JSON body") from exc
        raise RemoteError(
            f"{url} unreachable after {MAX_ATTEMPTS} attempts: {last_error}"
        )

    def meta(self) -> dict:
        body = self._request("GET", "/meta")
        vocab_size = body.get("vocab_size")
        if not isinstance(vocab_size, int) or vocab_size < 1:
            raise ProtocolError(f"/meta returned invalid vocab_size: {vocab_size!r}")
        eos = body.get("eos_tokens", [])
        if not isinstance(eos, list) or not all(
            isinstance(t, int) and 1 <= t <= vocab_size for t in eos
        ):
            raise ProtocolError(f"/meta returned invalid eos_tokens: {eos!r}")
        return {"vocab_size": vocab_size, "eos_tokens": eos}

    def logits(self, tokens: Sequence[int], top_m: int) -> list[tuple[int, float]]:
        body = self._request(
            "POST", "/logits", {"tokens": [int(t) for t in tokens], "top_m": int(top_m)}
        )
        entries = body.get("entries")
        vocab_size = body.get("vocab_size")
        if not isinstance(entries, list) or not isinstance(vocab_size, int):
            raise ProtocolError(f"/logits returned malformed body: {body!r}")
        if len(entries) > top_m:
            raise ProtocolError(
                f"/logits returned {len(entries)} entries, more than top_m={top_m}"
            )
        out = []
        for entry in entries:
            token = entry.get("token") if isinstance(entry, dict) else None
            logit = entry.get("logit") if isinstance(entry, dict) else None
            if not isinstance(token, int) or not 1 <= token <= vocab_size:
                raise ProtocolError(f"/logits entry has token id out of range: {entry!r}")
            if not isinstance(logit, (int, float)):
                raise ProtocolError(f"/logits entry has non-numeric logit: {entry!r}")
            out.append((token, float(logit)))
        return out

    def scores(self, texts: Sequence[Sequence[int]]) -> list[ClassScores]:
        body = self._request(
            "POST", "/scores", {"texts": [[int(t) for t in xs] for xs in texts]}
        )
        triples = body.get("scores")
        if not isinstance(triples, list) or len(triples) != len(texts):
            raise ProtocolError(
                f"/scores returned {len(triples) if isinstance(triples, list) else '?'} "
                f"triples for {len(texts)} texts"
            )
        out = []
        for triple in triples:
            if not isinstance(triple, list) or len(triple) != 3:
                raise ProtocolError(f"/scores triple malformed: {triple!r}")
            try:
                out.append(ClassScores(*[float(v) for v in triple]))
            except (TypeError, ValueError) as exc:
                raise ProtocolError(f"/scores triple invalid: {triple!r}") from exc
        return out

    def encode(self, text: str) -> list[int]:
        body = self._request("POST", "/encode", {"text": text})
        tokens = body.get("tokens")
        if not isinstance(tokens, list) or not all(
            isinstance(t, int) and t >= 1 for t in tokens
        ):
            raise ProtocolError(f"/encode returned invalid tokens: {tokens!r}")
        return tokens


class RemotePredictor:
    """Logit source backed by the bridge's /logits endpoint.

    Only the top ``top_logits`` entries cross the wire; every other position
    is filled with a large negative sentinel, which is safe because filters
    never look past the transmitted candidates (configs validate
    k_top <= top_logits).
    """

    def __init__(self, endpoint: str, top_logits: int = 100,
                 client: BridgeClient | None = None):
        if top_logits < 1:
            raise ValueError(f"top_logits must be >= 1, got {top_logits}")
        self._client = client or BridgeClient(endpoint)
        self.top_logits = top_logits
        self._vocab_size: int | None = None
        self._eos_tokens: tuple[int, ...] = ()

    @property
    def vocab_size(self) -> int:
        if self._vocab_size is None:
            self._load_meta()
        return self._vocab_size

    @property
    def eos_tokens(self) -> tuple[int, ...]:
        if self._vocab_size is None:
            self._load_meta()
        return self._eos_tokens

    def _load_meta(self) -> None:
        meta = self._client.meta()
        self._vocab_size = meta["vocab_size"]
        self._eos_tokens = tuple(meta["eos_tokens"])

    def check_vocabulary(self, vocab: Vocabulary) -> None:
        """Fail fast when a configured vocabulary disagrees with the bridge."""
        if vocab.size != self.vocab_size:
            raise ProtocolError(
                f"configured vocabulary size {vocab.size} does not match "
                f"bridge vocab_size {self.vocab_size}"
            )

    def evaluate(self, text: Text) -> np.ndarray:
        n = self.vocab_size
        entries = self._client.logits(text.tokens, self.top_logits)
        out = np.full(n, SENTINEL_LOGIT, dtype=np.float64)
        for token, logit in entries:
            out[token - 1] = logit
        return out


class RemoteScorer:
    """3-class scorer backed by the bridge's /scores endpoint."""

    def __init__(self, endpoint: str, client: BridgeClient | None = None):
        self._client = client or BridgeClient(endpoint)

    def __call__(self, text: Text) -> ClassScores:
        return self._client.scores([text.tokens])[0]

    def score_many(self, texts: Sequence[Text]) -> list[ClassScores]:
        if not texts:
            return []
        return self._client.scores([t.tokens for t in texts])
