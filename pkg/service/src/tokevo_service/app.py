"""FastAPI application implementing the scoring wire protocol:
GET /v1/meta, POST /v1/tokenize, POST /v1/score."""

from __future__ import annotations

import threading
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .backends import build_backend
from .config import ServiceConfig
from .schemas import MetaResponse, ScoreRequest, TokenizeRequest, TokenizeResponse


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig.from_env()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.backend = build_backend(config)
        yield
        app.state.backend = None

    app = FastAPI(title="tokevo scoring service", lifespan=lifespan)
    app.state.backend = None
    app.state.config = config
    app.state.score_lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def validation_to_400(request: Request, exc: RequestValidationError):
        # the wire contract promises 400, not FastAPI's default 422
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def backend_or_none():
        return app.state.backend

    @app.get("/v1/meta", response_model=MetaResponse)
    def serve_meta():
        backend = backend_or_none()
        if backend is None:
            return JSONResponse(status_code=503, content={"detail": "models not ready"})
        return MetaResponse(
            vocab_size=backend.vocab_size,
            pad_id=backend.pad_id,
            bos_id=backend.bos_id,
            eos_id=backend.eos_id,
            max_content_len=backend.max_content_len,
            max_batch=config.max_batch,
            model_ids=backend.model_ids,
        )

    @app.post("/v1/tokenize", response_model=TokenizeResponse)
    def serve_tokenize(payload: TokenizeRequest):
        backend = backend_or_none()
        if backend is None:
            return JSONResponse(status_code=503, content={"detail": "models not ready"})
        if not payload.text or not payload.text.strip():
            return JSONResponse(status_code=400, content={"detail": "text must be non-empty"})
        return TokenizeResponse(token_ids=backend.tokenize(payload.text))

    @app.post("/v1/score")
    def serve_score(payload: ScoreRequest):
        backend = backend_or_none()
        if backend is None:
            return JSONResponse(status_code=503, content={"detail": "models not ready"})
        if len(payload.batch) > config.max_batch:
            return JSONResponse(
                status_code=413,
                content={
                    "detail": f"batch of {len(payload.batch)} exceeds max_batch {config.max_batch}"
                },
            )
        for index, genotype in enumerate(payload.batch):
            if len(genotype.token_ids) > backend.max_content_len:
                return JSONResponse(
                    status_code=400,
                    content={
                        "detail": f"batch[{index}] has {len(genotype.token_ids)} ids, "
                        f"limit {backend.max_content_len}"
                    },
                )
            for token_id in genotype.token_ids:
                if not 0 <= token_id < backend.vocab_size:
                    return JSONResponse(
                        status_code=400,
                        content={"detail": f"batch[{index}] id {token_id} out of range"},
                    )
                if token_id in (backend.bos_id, backend.eos_id):
                    return JSONResponse(
                        status_code=400,
                        content={
                            "detail": f"batch[{index}] contains sequence marker {token_id}"
                        },
                    )
        with app.state.score_lock:  # one batch per device at a time
            items = backend.score_batch(payload, config.artifact_dir)
        results = []
        failed = False
        for item in items:
            if item.error is not None:
                failed = True
                results.append({"error": item.error})
            else:
                results.append(
                    {
                        "aesthetic": item.aesthetic,
                        "clip_score": item.clip_score,
                        "image_ref": item.image_ref,
                    }
                )
        if failed:
            return JSONResponse(status_code=500, content={"results": results})
        return {"results": results}

    return app
