from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from slotfill.api.routes.extract import router as extract_router
from slotfill.api.routes.health import router as health_router
from slotfill.api.routes.sessions import router as sessions_router
from slotfill.api.services.tracker import SessionTracker, open_store
from slotfill.backends.base import CompletionBackend
from slotfill.backends.factory import build_backend
from slotfill.config import AppSettings
from slotfill.errors import ConfigError

logger = logging.getLogger(__name__)


async def _validation_error(request: Request, exc: RequestValidationError) -> JSONResponse:
    first = exc.errors()[0] if exc.errors() else {}
    field = ".".join(str(p) for p in first.get("loc", ()))
    return JSONResponse(
        status_code=400,
        content={
            "ok": False,
            "detail": {"error": "MalformedBody", "message": first.get("msg", "invalid request body"), "field": field},
        },
    )


def create_app(settings: AppSettings | None = None, backend: CompletionBackend | None = None) -> FastAPI:
    settings = settings or AppSettings()
    if backend is None:
        if settings.backend is None:
            raise ConfigError("no backend configured (pass --backend CFG.toml)")
        backend = build_backend(settings.backend, budget=settings.tracker.budget, counter=settings.tracker.token_counter)

    app = FastAPI(title="Slot-filling dialogue state tracker")
    app.state.settings = settings
    app.state.tracker = SessionTracker(backend, settings.tracker, open_store(settings.server.store))

    app.add_middleware(
        CORSMiddleware,
        allow_origins=settings.server.cors_origins,
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.add_exception_handler(RequestValidationError, _validation_error)

    app.include_router(extract_router, prefix="/v1", tags=["extract"])
    app.include_router(sessions_router, prefix="/v1", tags=["sessions"])
    app.include_router(health_router, tags=["health"])

    @app.get("/")
    async def root():
        return {"status": "ok", "service": "slotfill"}

    return app


def serve(settings: AppSettings, backend: CompletionBackend | None = None) -> None:
    import uvicorn

    app = create_app(settings, backend)
    logger.info("serving on %s:%d", settings.server.host, settings.server.port)
    # in-process server, no reloader
    config = uvicorn.Config(app=app, host=settings.server.host, port=settings.server.port, reload=False, log_config=None)
    server = uvicorn.Server(config)
    server.run()
