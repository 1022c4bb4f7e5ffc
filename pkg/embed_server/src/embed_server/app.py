"""FastAPI application serving embeddings over the fixed wire protocol.

    GET  /health -> {"status": "ok", "model": str, "dim": int}  (503 until loaded)
    POST /embed  {"texts": [str]} -> {"embeddings": [[float]], "dim": int}

The encoder is built once during application startup and is read-only
afterwards, so requests may be served concurrently.  Responses preserve
request order and are identical for identical request bodies within one
server lifetime.
"""

from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .encoders import build_encoder

DEFAULT_MODEL = "all-mpnet-base-v2"
DEFAULT_MAX_BATCH = 256


class EmbedRequest(BaseModel):
    texts: list[str]


def create_app(model: str = DEFAULT_MODEL,
               max_batch: int = DEFAULT_MAX_BATCH) -> FastAPI:
    """Build the service app; the encoder loads on startup."""
    if max_batch < 1:
        raise ValueError(f"max_batch must be >= 1, got {max_batch}")

    @asynccontextmanager
    async def lifespan(app):
        app.state.encoder = build_encoder(model)
        yield

    app = FastAPI(title="embed-server", lifespan=lifespan)

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request, exc):
        # the protocol pins 400 for malformed bodies, not the default 422
        return JSONResponse({"detail": "malformed request body"}, status_code=400)

    def current_encoder():
        return getattr(app.state, "encoder", None)

    @app.get("/health")
    def health():
        encoder = current_encoder()
        if encoder is None:
            return JSONResponse({"status": "loading", "model": str(model)},
                                status_code=503)
        return {"status": "ok", "model": encoder.name, "dim": encoder.dim}

    @app.post("/embed")
    def embed(body: EmbedRequest):
        encoder = current_encoder()
        if encoder is None:
            return JSONResponse({"detail": "model is still loading"},
                                status_code=503)
        if not body.texts:
            return JSONResponse({"detail": "texts must be a nonempty list"},
                                status_code=400)
        if len(body.texts) > max_batch:
            return JSONResponse(
                {"detail": f"batch of {len(body.texts)} exceeds max {max_batch}"},
                status_code=413)
        vectors = encoder.encode(body.texts)
        return {"embeddings": vectors.tolist(), "dim": encoder.dim}

    return app
