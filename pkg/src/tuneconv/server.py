"""HTTP inference service for interactive tuning.

JSON wire format; images travel as base64-encoded PNG. The loaded model is
shared read-only across requests; each request runs an isolated forward pass.
Out-of-range omega is clamped into [0,1] and the effective values echoed back.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from starlette.concurrency import run_in_threadpool

from . import tensor as T
from .checkpoint import Checkpoint, model_from_checkpoint
from .data import ImageIOError, decode_png, encode_png
from .tensor import Tensor

DEFAULT_MAX_PIXELS = 2_000_000


def infer_image(model, image: Tensor, omega: np.ndarray) -> Tensor:
    """The single forward-pass entry point shared by CLI and service."""
    omega_t = Tensor(np.asarray(omega, dtype=np.float32)) \
        if model.config.variant == "tunable" else None
    with T.no_grad():
        return model.forward(image, omega_t)


def clamp_omega(omega) -> tuple:
    arr = np.asarray(omega, dtype=np.float32).reshape(-1)
    clamped = np.clip(arr, 0.0, 1.0)
    return clamped, bool(np.any(clamped != arr))


def create_app(ckpt_path, max_pixels: int = DEFAULT_MAX_PIXELS,
               static_dir=None) -> FastAPI:
    ckpt = Checkpoint.load(ckpt_path)
    model = model_from_checkpoint(ckpt)
    ckpt_hash = hashlib.sha256(Path(ckpt_path).read_bytes()).hexdigest()
    p = model.config.p

    app = FastAPI(title="tuneconv inference service")

    @app.get("/healthz")
    def healthz():
        return JSONResponse({"status": "ok"})

    @app.get("/model")
    def model_info():
        return JSONResponse({
            "p": p,
            "objective_ids": getattr(model, "objective_ids", []),
            "lambda": getattr(model, "lambdas", []),
            "input": {"format": "png", "channels": 3, "max_pixels": max_pixels},
            "checkpoint_hash": ckpt_hash,
        })

    @app.post("/infer")
    async def infer_endpoint(request: Request):
        try:
            payload = await request.json()
        except Exception:
            return JSONResponse({"reason": "body is not valid JSON"},
                                status_code=400)
        if not isinstance(payload, dict) or "image" not in payload \
                or "omega" not in payload:
            return JSONResponse(
                {"reason": "body must be an object with 'image' and 'omega'"},
                status_code=400)
        omega = payload["omega"]
        if not isinstance(omega, list) \
                or not all(isinstance(v, (int, float)) for v in omega):
            return JSONResponse({"reason": "'omega' must be a list of numbers"},
                                status_code=400)
        if len(omega) != p:
            return JSONResponse(
                {"reason": f"'omega' must have length {p}, got {len(omega)}"},
                status_code=422)
        try:
            png = base64.b64decode(payload["image"], validate=True)
            image = decode_png(png)
        except (binascii.Error, TypeError, ImageIOError):
            return JSONResponse({"reason": "'image' is not base64-encoded PNG"},
                                status_code=400)
        _, _, h, w = image.shape
        if h * w > max_pixels:
            return JSONResponse(
                {"reason": f"image has {h * w} pixels, limit is {max_pixels}"},
                status_code=413)
        clamped, _ = clamp_omega(omega)
        t0 = time.perf_counter()
        pred = await run_in_threadpool(infer_image, model, image, clamped)
        latency_ms = 1000.0 * (time.perf_counter() - t0)
        return JSONResponse({
            "image": base64.b64encode(encode_png(pred)).decode("ascii"),
            "clamped_omega": [float(v) for v in clamped],
            "latency_ms": latency_ms,
        })

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="ui")
    return app


def serve(ckpt_path, port: int = 8787, host: str = "127.0.0.1",
          max_pixels: int = DEFAULT_MAX_PIXELS, static_dir=None):
    import uvicorn
    app = create_app(ckpt_path, max_pixels=max_pixels, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
