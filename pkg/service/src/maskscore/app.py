"""HTTP surface: version-1 JSON wire format over FastAPI.

Error mapping: malformed requests (wrong version, missing or non-positive
fields, no mask in the prompt, more than four masks) are 400; a top_n over
the service cap is 413; everything before the model finishes loading is
503. The body of every error is {"error": reason}.
"""

from __future__ import annotations

import os
import sys
from contextlib import asynccontextmanager

import uvicorn
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .scoring import MaskScorer, PromptError

WIRE_VERSION = 1
DEFAULT_TOP_N_CAP = 500


def _error(status: int, reason: str) -> JSONResponse:
    return JSONResponse({"error": reason}, status_code=status)


def create_app(checkpoint: str, top_n_cap: int = DEFAULT_TOP_N_CAP, eager: bool = True) -> FastAPI:
    """Build the service around one checkpoint.

    With eager=True the model loads during construction; with eager=False
    it loads on server startup, and both endpoints answer 503 until then.
    """
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if app.state.scorer is None:
            app.state.scorer = MaskScorer(checkpoint)
        yield

    app = FastAPI(title="maskscore", lifespan=lifespan)
    app.state.scorer = None
    app.state.checkpoint = checkpoint
    app.state.top_n_cap = top_n_cap

    if eager:
        app.state.scorer = MaskScorer(checkpoint)

    @app.get("/health")
    def health():
        scorer = app.state.scorer
        if scorer is None:
            return JSONResponse(
                {"status": "loading", "model": app.state.checkpoint}, status_code=503
            )
        return {"status": "ok", "model": scorer.checkpoint, "mask_token": scorer.mask_token}

    @app.post("/fill-mask")
    async def fill_mask(request: Request):
        scorer = app.state.scorer
        if scorer is None:
            return _error(503, "model not ready")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body must be a JSON object")
        if not isinstance(body, dict):
            return _error(400, "request body must be a JSON object")
        if body.get("v") != WIRE_VERSION:
            return _error(400, f"unsupported wire version {body.get('v')!r}")
        prompt = body.get("prompt")
        if not isinstance(prompt, str) or not prompt:
            return _error(400, "prompt must be a non-empty string")
        top_n = body.get("top_n")
        if isinstance(top_n, bool) or not isinstance(top_n, int) or top_n < 1:
            return _error(400, "top_n must be a positive integer")
        if top_n > app.state.top_n_cap:
            return _error(413, f"top_n {top_n} is over the service cap {app.state.top_n_cap}")
        try:
            masks = scorer.fill(prompt, top_n)
        except PromptError as exc:
            return _error(400, str(exc))
        return {
            "v": WIRE_VERSION,
            "model": scorer.checkpoint,
            "masks": [
                [{"token": token, "prob": prob} for token, prob in mask] for mask in masks
            ],
        }

    return app


def main() -> int:
    checkpoint = os.environ.get("MASKSCORE_MODEL")
    if not checkpoint:
        print(
            "error: set MASKSCORE_MODEL to a masked-LM checkpoint name or path",
            file=sys.stderr,
        )
        return 2
    host = os.environ.get("MASKSCORE_HOST", "127.0.0.1")
    port = int(os.environ.get("MASKSCORE_PORT", "9000"))
    cap = int(os.environ.get("MASKSCORE_TOP_N_CAP", str(DEFAULT_TOP_N_CAP)))
    uvicorn.run(create_app(checkpoint, top_n_cap=cap), host=host, port=port)
    return 0
