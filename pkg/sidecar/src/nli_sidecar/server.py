"""HTTP service implementing the /score wire protocol.

POST /score {"premise","hypothesis"} -> {"p_entail": p}
POST /score_batch {"pairs":[...]} -> {"p_entail":[...]} in input order.
Malformed bodies get 400; requests before the backend finishes loading get
503.
"""
from __future__ import annotations

import threading
from contextlib import asynccontextmanager
from typing import Callable

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .scorers import ScorerBackend


class ScoreRequest(BaseModel):
    premise: str
    hypothesis: str


class BatchRequest(BaseModel):
    pairs: list[ScoreRequest]


def create_app(backend_loader: Callable[[], ScorerBackend]) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        threading.Thread(target=load, daemon=True).start()
        yield

    app = FastAPI(title="entailment scorer", lifespan=lifespan)
    app.state.backend = None
    app.state.load_error = None

    def load() -> None:
        try:
            app.state.backend = backend_loader()
        except Exception as exc:  # surfaced as 503 detail
            app.state.load_error = str(exc)

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:3])})

    def backend() -> ScorerBackend:
        if app.state.backend is None:
            detail = app.state.load_error or "model is still loading"
            raise HTTPException(status_code=503, detail=detail)
        return app.state.backend

    @app.get("/healthz")
    def healthz():
        return {"ready": app.state.backend is not None}

    @app.post("/score")
    def score(request: ScoreRequest):
        probs = backend().probabilities([(request.premise, request.hypothesis)])
        return {"p_entail": probs[0]}

    @app.post("/score_batch")
    def score_batch(request: BatchRequest):
        pairs = [(p.premise, p.hypothesis) for p in request.pairs]
        return {"p_entail": backend().probabilities(pairs)}

    return app


def serve(app: FastAPI, host: str = "127.0.0.1", port: int = 8400) -> None:
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="info")
