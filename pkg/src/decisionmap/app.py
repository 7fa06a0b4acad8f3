"""HTTP service exposing one decision-map session to the browser UI.

The session is a small state machine (idle -> computing -> ready/failed);
every recompute builds a complete immutable snapshot before atomically
replacing the served one, so readers never observe a half-updated map.
"""

from __future__ import annotations

import base64
import io
import json
import threading
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from . import pipeline as pipeline_mod
from .classifier import ClassifierHandle
from .datasets import Dataset
from .errors import DecisionMapError
from .pipeline import PipelineConfig, probe, run_artifacts
from .render import render_png


@dataclass(eq=False)
class Snapshot:
    artifacts: pipeline_mod.PipelineArtifacts
    map_bytes: bytes
    png_bytes: bytes


class Session:
    """One dataset + classifier with at most one map computation in flight."""

    def __init__(self, data: Dataset, classifier: ClassifierHandle,
                 config: PipelineConfig = PipelineConfig()):
        self.data = data
        self.classifier = classifier
        self.config = config
        self._lock = threading.Lock()
        self._snapshot: Snapshot | None = None
        self._status = "idle"
        self._stage = ""
        self._fraction = 0.0
        self._failure = ""
        self._worker: threading.Thread | None = None

    # -- state ------------------------------------------------------------

    def state(self) -> dict:
        with self._lock:
            out = {
                "status": self._status,
                "n": self.data.n,
                "dim": self.data.dim,
                "classes": self.classifier.class_count,
            }
            if self._status == "computing":
                out["stage"] = self._stage
                out["fraction"] = self._fraction
            if self._status == "failed":
                out["reason"] = self._failure
            return out

    def snapshot(self) -> Snapshot | None:
        with self._lock:
            return self._snapshot

    def ready(self) -> bool:
        with self._lock:
            return self._status == "ready" and self._snapshot is not None

    # -- compute ----------------------------------------------------------

    def start_compute(self, config: PipelineConfig | None = None) -> bool:
        """Kick off a background (re)compute; False if one is already running."""
        with self._lock:
            if self._status == "computing":
                return False
            if config is not None:
                self.config = config
            self._status = "computing"
            self._stage = "queued"
            self._fraction = 0.0
            self._worker = threading.Thread(target=self._compute, daemon=True)
            self._worker.start()
            return True

    def compute_blocking(self, config: PipelineConfig | None = None) -> None:
        if config is not None:
            self.config = config
        self._status = "computing"
        self._compute()

    def wait(self, timeout: float | None = None) -> None:
        worker = self._worker
        if worker is not None:
            worker.join(timeout)

    def _progress(self, stage: str, fraction: float) -> None:
        with self._lock:
            self._stage = stage
            self._fraction = float(fraction)

    def _compute(self) -> None:
        try:
            artifacts = run_artifacts(self.data, self.classifier, self.config,
                                      progress=self._progress)
            snap = Snapshot(
                artifacts=artifacts,
                map_bytes=artifacts.decision_map.to_json_bytes(),
                png_bytes=render_png(artifacts.decision_map),
            )
            with self._lock:
                self._snapshot = snap
                self._status = "ready"
        except Exception as exc:  # surfaced through /api/state
            with self._lock:
                self._status = "failed"
                self._failure = f"{type(exc).__name__}: {exc}"


def merge_config(config: PipelineConfig, partial: dict) -> PipelineConfig:
    """Overlay a partial JSON config onto an existing PipelineConfig."""
    from dataclasses import replace

    from .embedding import UmapParams
    from .fisher_metric import FisherMetricConfig

    metric = config.metric
    if "metric" in partial:
        m = dict(config.metric.to_dict(), **partial["metric"])
        metric = FisherMetricConfig.from_dict(m)
    umap = config.umap
    if "umap" in partial:
        umap = replace(umap, **partial["umap"])
    inverse = config.inverse
    if "inverse" in partial:
        inverse = replace(inverse, **partial["inverse"])
    grid = config.grid
    if "grid" in partial:
        grid = replace(grid, **partial["grid"])
    top = {
        k: partial[k]
        for k in ("parallelism", "quality_seed", "euclidean_baseline")
        if k in partial
    }
    return replace(config, metric=metric, umap=umap, inverse=inverse, grid=grid, **top)


def build_app(session: Session, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="decisionmap")

    @app.get("/api/state")
    def get_state():
        return session.state()

    @app.get("/api/map")
    def get_map():
        snap = session.snapshot()
        if snap is None:
            return JSONResponse({"error": "map not ready"}, status_code=409)
        return Response(content=snap.map_bytes, media_type="application/json")

    @app.get("/api/map.png")
    def get_map_png():
        snap = session.snapshot()
        if snap is None:
            return JSONResponse({"error": "map not ready"}, status_code=409)
        return Response(content=snap.png_bytes, media_type="image/png")

    @app.post("/api/probe")
    async def post_probe(request: Request):
        if not session.ready():
            return JSONResponse({"error": "session not ready"}, status_code=409)
        body = await _json_body(request)
        if body is None or "y" not in body:
            return JSONResponse({"error": "body must be {\"y\": [x, y]}"}, status_code=400)
        y = body["y"]
        if (not isinstance(y, (list, tuple)) or len(y) != 2
                or not all(isinstance(v, (int, float)) for v in y)
                or not all(np.isfinite(v) for v in y)):
            return JSONResponse({"error": "y must be two finite numbers"}, status_code=400)
        snap = session.snapshot()
        x, probs, label, entropy = probe(
            snap.artifacts.decision_map, snap.artifacts.inverse, session.classifier,
            np.asarray(y, dtype=np.float64),
        )
        out = {
            "x": x.tolist(),
            "probs": probs.tolist(),
            "label": label,
            "entropy": entropy,
        }
        shape = session.data.image_shape
        if shape is not None:
            out["image_png"] = _probe_image_base64(x, shape)
        return JSONResponse(out)

    @app.post("/api/recompute")
    async def post_recompute(request: Request):
        body = await _json_body(request)
        if body is None:
            return JSONResponse({"error": "body must be a JSON object"}, status_code=400)
        try:
            config = merge_config(session.config, body)
        except (TypeError, ValueError, DecisionMapError) as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        if not session.start_compute(config):
            return JSONResponse({"error": "a recompute is already running"}, status_code=409)
        return JSONResponse({"status": "accepted"}, status_code=202)

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


async def _json_body(request: Request):
    try:
        body = await request.json()
    except json.JSONDecodeError:
        return None
    return body if isinstance(body, dict) else None


def _probe_image_base64(x: np.ndarray, shape) -> str:
    from PIL import Image

    h, w, channels = shape
    arr = np.clip(np.asarray(x, dtype=np.float64).reshape(h, w, channels), 0.0, 1.0)
    arr = np.round(arr * 255).astype(np.uint8)
    if channels == 1:
        img = Image.fromarray(arr[:, :, 0], mode="L")
    else:
        img = Image.fromarray(arr, mode="RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


def serve(session: Session, host: str = "127.0.0.1", port: int = 8000,
          static_dir: str | None = None) -> None:
    import uvicorn

    session.start_compute()
    uvicorn.run(build_app(session, static_dir=static_dir), host=host, port=port)
