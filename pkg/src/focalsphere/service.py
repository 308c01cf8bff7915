"""HTTP service for interactive focal exploration.

State (graph, embedding, fitted d_max, events) is loaded once and served
read-only; every /focal request runs its own BFS, projection and
rasterization pass, which is what keeps per-request memory bounded and
latency within interactive range even for millions of nodes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .focal import FocalParams, fit_dmax, fit_dmax_for, focal_adjust
from .geometry import lambert_project, rotate_to_pole
from .graphs import DistanceField, Graph, bfs_distances
from .layout import Embedding
from .render import OverlaySpec, make_focal_view, rasterize

SEARCH_CAP = 50


@dataclass
class SessionState:
    """Everything the handlers read; immutable during serving."""

    graph: Graph
    embedding: Embedding
    d_max: float
    events: np.ndarray | None = None
    default_alpha: float = 0.8

    def __post_init__(self):
        labels = [self.graph.label_of(i) for i in range(self.graph.node_count)]
        self.labels = np.array(labels, dtype=object)
        self.lower_labels = np.char.lower(np.array(labels, dtype=str))
        self.label_to_index = {lab: i for i, lab in enumerate(labels)}

    def overlays(self) -> list[str]:
        modes = ["none", "distance-bands"]
        if self.events is not None:
            modes.append("event-time")
        return modes


def build_session(
    graph: Graph,
    embedding: Embedding,
    events: np.ndarray | None = None,
    seed: int = 0,
    default_alpha: float = 0.8,
) -> SessionState:
    """Fit d_max once at startup and freeze the serving state."""
    d_max, _ = fit_dmax_for(graph, embedding, seed=seed)
    return SessionState(
        graph=graph, embedding=embedding, d_max=d_max,
        events=events, default_alpha=default_alpha,
    )


def _refit_for_focal(session: SessionState, focal: int, dist: DistanceField) -> float:
    reached = np.flatnonzero(dist.dist > 0)
    theta = np.arccos(np.clip(
        session.embedding.positions[reached] @ session.embedding.positions[focal], -1.0, 1.0
    ))
    return fit_dmax(dist.dist[reached].astype(np.float64), theta)


def create_app(session: SessionState | None = None) -> FastAPI:
    app = FastAPI(title="focalsphere")
    app.state.session = session

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request, exc):  # spec'd behavior: malformed params are 400
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    def state() -> SessionState:
        s = app.state.session
        if s is None:
            raise HTTPException(status_code=503, detail="session not loaded yet")
        return s

    def resolve(label: str) -> int:
        s = state()
        idx = s.label_to_index.get(label)
        if idx is None:
            raise HTTPException(status_code=404, detail=f"unknown node label {label!r}")
        return idx

    def check_params(alpha: float, width: int, overlay: str, t0: float, t1: float):
        s = state()
        if not 0.0 <= alpha <= 1.0:
            raise HTTPException(status_code=400, detail="alpha must be in [0, 1]")
        if not 16 <= width <= 4096:
            raise HTTPException(status_code=400, detail="width must be in [16, 4096]")
        if overlay not in s.overlays():
            raise HTTPException(status_code=400, detail=f"overlay must be one of {s.overlays()}")
        if not (0.0 <= t0 <= 1.0 and 0.0 <= t1 <= 1.0 and t0 <= t1):
            raise HTTPException(status_code=400, detail="need 0 <= t0 <= t1 <= 1")

    @app.get("/meta")
    def meta():
        s = state()
        return {
            "nodes": s.graph.node_count,
            "edges": s.graph.edge_count,
            "d_max": s.d_max,
            "default_alpha": s.default_alpha,
            "overlays": s.overlays(),
            "colormaps": ["cooling-red-yellow-green-blue-white", "distance-bands-7"],
        }

    @app.get("/focal/{label}")
    def focal_png(
        label: str,
        alpha: float | None = None,
        width: int = 1024,
        overlay: str = "distance-bands",
        t0: float = 0.0,
        t1: float = 1.0,
        refit: bool = False,
    ):
        s = state()
        a = s.default_alpha if alpha is None else alpha
        check_params(a, width, overlay, t0, t1)
        focal = resolve(label)
        t_bfs = time.perf_counter()
        dist = bfs_distances(s.graph, focal)
        bfs_ms = 1000.0 * (time.perf_counter() - t_bfs)
        t_render = time.perf_counter()
        d_max = _refit_for_focal(s, focal, dist) if refit else s.d_max
        params = FocalParams(focal=focal, d_max=d_max, alpha=a)
        view = make_focal_view(s.embedding, s.graph, params, distances=dist)
        window = (t0, t1) if overlay == "event-time" else None
        spec = OverlaySpec(mode=overlay, event_times=s.events, time_window=window)
        raster = rasterize(view, spec, width=width)
        render_ms = 1000.0 * (time.perf_counter() - t_render)
        t_encode = time.perf_counter()
        png = raster.png_bytes(compress_level=1)
        encode_ms = 1000.0 * (time.perf_counter() - t_encode)
        return Response(
            content=png,
            media_type="image/png",
            headers={
                "bfs_ms": f"{bfs_ms:.1f}",
                "render_ms": f"{render_ms:.1f}",
                "encode_ms": f"{encode_ms:.1f}",
            },
        )

    @app.get("/focal/{label}/selectable")
    def selectable(label: str, alpha: float | None = None, refit: bool = False):
        s = state()
        a = s.default_alpha if alpha is None else alpha
        if not 0.0 <= a <= 1.0:
            raise HTTPException(status_code=400, detail="alpha must be in [0, 1]")
        focal = resolve(label)
        dist = bfs_distances(s.graph, focal)
        # selectable = focal + direct neighbors + event-marked nodes; the
        # projection pipeline runs on just that subset
        idx = [focal]
        idx.extend(int(j) for j in s.graph.neighbors(focal))
        if s.events is not None:
            idx.extend(int(j) for j in np.flatnonzero(~np.isnan(s.events)) if j != focal)
        idx = list(dict.fromkeys(idx))  # dedup, focal first
        sub = np.array(idx, np.int64)
        d_max = _refit_for_focal(s, focal, dist) if refit else s.d_max
        sub_emb = Embedding(positions=s.embedding.positions[sub].copy())
        sub_dist = DistanceField(source=0, dist=dist.dist[sub])
        params = FocalParams(focal=0, d_max=d_max, alpha=a)
        adjusted = focal_adjust(sub_emb, sub_dist, params)
        rotated = rotate_to_pole(adjusted.positions, adjusted.positions[0])
        uv = lambert_project(rotated)
        entries = []
        for k, node in enumerate(idx):
            e = {
                "label": str(s.labels[node]),
                "u": float(uv[k, 0]),
                "v": float(uv[k, 1]),
                "d": int(dist.dist[node]),
            }
            if s.events is not None and not np.isnan(s.events[node]):
                e["t"] = float(s.events[node])
            entries.append(e)
        return {"focal": label, "d_max": d_max, "nodes": entries}

    @app.get("/search")
    def search(q: str = ""):
        s = state()
        if not q:
            raise HTTPException(status_code=400, detail="empty query")
        pos = np.char.find(s.lower_labels, q.lower())
        hits = np.flatnonzero(pos >= 0)
        ranked = sorted(hits, key=lambda i: (pos[i], str(s.labels[i])))[:SEARCH_CAP]
        return {"matches": [{"label": str(s.labels[i]), "node": int(i)} for i in ranked]}

    return app
