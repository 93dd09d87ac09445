from __future__ import annotations

from fastapi import APIRouter, Request
from fastapi.responses import JSONResponse

from slotfill.api.services.tracker import reset_metrics

router = APIRouter()


@router.get("/healthz")
def healthz(request: Request):
    backend = request.app.state.tracker.backend
    if getattr(backend, "is_local", False):
        return {"ok": True, "backend": "local"}
    if backend.ping():
        return {"ok": True, "backend": "reachable"}
    return JSONResponse(status_code=503, content={"ok": False, "backend": "unreachable"})


@router.get("/v1/metrics")
def metrics(request: Request):
    return {"ok": True, "metrics": request.app.state.tracker.metrics()}


@router.post("/v1/metrics/reset")
def metrics_reset():
    return reset_metrics()
