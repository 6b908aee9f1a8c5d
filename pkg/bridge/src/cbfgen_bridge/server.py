"""HTTP surface of the bridge: /meta, /logits, /scores, /encode.

JSON over HTTP/1.1, UTF-8. Token ids on the wire are 1-based over the
generator's vocabulary. Model access is serialized with a lock so responses
are independent of request interleaving.
"""

from __future__ import annotations

import threading

import torch
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .models import ModelBundle, classifier_scores, generator_logits


class LogitsRequest(BaseModel):
    tokens: list[int]
    top_m: int = Field(default=100, ge=1)


class LogitsEntry(BaseModel):
    token: int
    logit: float


class LogitsResponse(BaseModel):
    entries: list[LogitsEntry]
    vocab_size: int


class ScoresRequest(BaseModel):
    texts: list[list[int]] | None = None
    tokens: list[int] | None = None


class ScoresResponse(BaseModel):
    scores: list[list[float]]
    truncated: list[bool]


class EncodeRequest(BaseModel):
    text: str
    add_special_tokens: bool = True


class EncodeResponse(BaseModel):
    tokens: list[int]


class MetaResponse(BaseModel):
    vocab_size: int
    eos_tokens: list[int]


def create_app(bundle: ModelBundle) -> FastAPI:
    app = FastAPI(title="cbfgen-bridge")
    lock = threading.Lock()

    def check_tokens(tokens, field_name="tokens"):
        for t in tokens:
            if not isinstance(t, int) or not 1 <= t <= bundle.vocab_size:
                raise HTTPException(
                    status_code=400,
                    detail=f"{field_name}: token id {t} outside [1, {bundle.vocab_size}]",
                )

    @app.get("/meta", response_model=MetaResponse)
    def meta() -> MetaResponse:
        return MetaResponse(
            vocab_size=bundle.vocab_size, eos_tokens=bundle.eos_tokens
        )

    @app.post("/logits", response_model=LogitsResponse)
    def logits(request: LogitsRequest) -> LogitsResponse:
        check_tokens(request.tokens)
        if len(request.tokens) >= bundle.max_context:
            raise HTTPException(
                status_code=400,
                detail=f"tokens: sequence length {len(request.tokens)} exceeds "
                f"the generator context of {bundle.max_context}",
            )
        with lock:
            values = generator_logits(bundle, request.tokens)
        top_m = min(request.top_m, bundle.vocab_size)
        # stable sort on descending logit, ties toward the lower token id
        order = torch.argsort(-values, stable=True)[:top_m]
        entries = [
            LogitsEntry(token=int(i) + 1, logit=float(values[i])) for i in order
        ]
        return LogitsResponse(entries=entries, vocab_size=bundle.vocab_size)

    @app.post("/scores", response_model=ScoresResponse)
    def scores(request: ScoresRequest) -> ScoresResponse:
        if request.texts is None and request.tokens is None:
            raise HTTPException(
                status_code=400, detail="provide either texts or tokens"
            )
        texts = request.texts if request.texts is not None else [request.tokens]
        for i, text in enumerate(texts):
            check_tokens(text, field_name=f"texts[{i}]")
        with lock:
            triples, truncated = classifier_scores(bundle, texts)
        return ScoresResponse(scores=triples, truncated=truncated)

    @app.post("/encode", response_model=EncodeResponse)
    def encode(request: EncodeRequest) -> EncodeResponse:
        with lock:
            ids = bundle.generator_tokenizer.encode(
                request.text, add_special_tokens=request.add_special_tokens
            )
        wire = [int(i) + 1 for i in ids]
        bad = [t for t in wire if not 1 <= t <= bundle.vocab_size]
        if bad:
            raise HTTPException(
                status_code=500,
                detail=f"tokenizer produced ids outside the generator vocabulary: {bad}",
            )
        return EncodeResponse(tokens=wire)

    return app
