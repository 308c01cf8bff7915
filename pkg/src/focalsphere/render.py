"""Focal projection and density rasterization.

Views are rendered as 2D histograms: every node stamps a small disk of
pixels, a pixel's opacity is n/(1+n) for n stamped counts (so output
brightness is independent of graph size), and overlay colors (distance
bands, categories, or spreading event times) are averaged per pixel.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .focal import FocalParams, focal_adjust
from .geometry import align_rotation, lambert_project, rotate_plane, rotate_to_pole, slerp
from .graphs import DistanceField, Graph, bfs_distances
from .layout import Embedding

# distance bands 0..6; anything further (or unreached) is drawn black
DISTANCE_BAND_COLORS = np.array(
    [
        (255, 255, 255),  # 0: the focal node itself
        (230, 55, 46),    # 1
        (244, 144, 12),   # 2
        (235, 210, 40),   # 3
        (60, 170, 60),    # 4
        (45, 110, 230),   # 5
        (150, 60, 200),   # 6
    ],
    np.uint8,
)
_BLACK = np.zeros(3, np.uint8)
DEFAULT_NODE_COLOR = np.array((40, 40, 48), np.uint8)

# cooling scheme for event times: t in [0,1] -> red, yellow, green, blue, white
COOLING_ANCHORS = np.array(
    [
        (255, 0, 0),
        (255, 255, 0),
        (0, 200, 0),
        (0, 64, 255),
        (255, 255, 255),
    ],
    np.float64,
)


def cooling_color(t: np.ndarray) -> np.ndarray:
    """Map normalized event times to the cooling colormap (vectorized)."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    x = t * (len(COOLING_ANCHORS) - 1)
    lo = np.minimum(x.astype(np.int64), len(COOLING_ANCHORS) - 2)
    frac = (x - lo)[..., None]
    rgb = COOLING_ANCHORS[lo] * (1.0 - frac) + COOLING_ANCHORS[lo + 1] * frac
    return np.round(rgb).astype(np.uint8)


def category_palette(n_colors: int = 42) -> np.ndarray:
    """Fixed palette of distinguishable colors (golden-angle hue walk)."""
    hues = (np.arange(n_colors) * 0.61803398875) % 1.0
    sats = np.where(np.arange(n_colors) % 3 == 2, 0.55, 0.85)
    vals = np.where(np.arange(n_colors) % 2 == 1, 0.75, 0.95)
    h6 = hues * 6.0
    k = (h6.astype(np.int64) % 6)[:, None]
    f = h6 - np.floor(h6)
    p = vals * (1 - sats)
    q = vals * (1 - sats * f)
    t = vals * (1 - sats * (1 - f))
    table = np.select(
        [k == 0, k == 1, k == 2, k == 3, k == 4, k == 5],
        [
            np.stack([vals, t, p], 1), np.stack([q, vals, p], 1),
            np.stack([p, vals, t], 1), np.stack([p, q, vals], 1),
            np.stack([t, p, vals], 1), np.stack([vals, p, q], 1),
        ],
    )
    return np.round(table * 255).astype(np.uint8)


def category_color(name: str, palette: np.ndarray | None = None) -> np.ndarray:
    """Stable color for a category token (hash into the palette)."""
    if palette is None:
        palette = category_palette()
    h = 2166136261
    for ch in name.encode("utf-8"):
        h = ((h ^ ch) * 16777619) & 0xFFFFFFFF
    return palette[h % len(palette)]


@dataclass
class OverlaySpec:
    """What per-node information is painted into the raster."""

    mode: str = "none"  # none | distance-bands | category | event-time
    categories: np.ndarray | None = None  # per-node string tokens
    category_colors: dict[str, tuple[int, int, int]] | None = None
    event_times: np.ndarray | None = None  # per-node normalized t in [0,1], NaN = no event
    time_window: tuple[float, float] | None = None

    def __post_init__(self):
        if self.mode not in ("none", "distance-bands", "category", "event-time"):
            raise ValueError(f"unknown overlay mode {self.mode!r}")
        if self.mode == "event-time" and self.event_times is None:
            raise ValueError("event-time overlay requires event_times")


@dataclass
class FocalView:
    """Plane coordinates plus hop distances for one focal node."""

    focal: int
    coords: np.ndarray  # (n, 2)
    dist: DistanceField
    params: FocalParams


@dataclass
class DensityRaster:
    """Per-pixel stamp counts and accumulated overlay color sums."""

    width: int
    height: int
    bins: np.ndarray  # (h, w) int64
    channels: np.ndarray  # (h, w, 3) int64 color sums
    background: np.ndarray = field(default_factory=lambda: np.array((255, 255, 255), np.uint8))

    def opacity(self) -> np.ndarray:
        """Per-pixel opacity n/(1+n); the complement of the transparency rule 1/(1+n)."""
        return self.bins / (1.0 + self.bins)

    def rgba(self) -> np.ndarray:
        """Straight-alpha RGBA image: mean stamp color with alpha from the opacity rule."""
        out = np.empty((self.height, self.width, 4), np.uint8)
        n = self.bins
        safe = np.maximum(n, 1)
        mean = np.round(self.channels / safe[..., None]).astype(np.uint8)
        out[..., :3] = np.where((n > 0)[..., None], mean, self.background)
        out[..., 3] = np.round(255.0 * n / (1.0 + n)).astype(np.uint8)
        return out

    def png_bytes(self, compress_level: int = 1) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.rgba(), "RGBA").save(buf, "PNG", compress_level=compress_level)
        return buf.getvalue()

    def save_png(self, path: str | Path, compress_level: int = 6) -> None:
        Path(path).write_bytes(self.png_bytes(compress_level=compress_level))


def make_focal_view(
    embedding: Embedding,
    graph: Graph,
    params: FocalParams,
    distances: DistanceField | None = None,
) -> FocalView:
    """BFS -> focal correction -> rotate focal to the pole -> Lambert projection."""
    if not 0 <= params.focal < graph.node_count:
        raise ValueError("focal index out of range")
    if distances is None:
        distances = bfs_distances(graph, params.focal)
    adjusted = focal_adjust(embedding, distances, params)
    rotated = rotate_to_pole(adjusted.positions, adjusted.positions[params.focal])
    coords = lambert_project(rotated)
    return FocalView(focal=params.focal, coords=coords, dist=distances, params=params)


def node_colors(spec: OverlaySpec, dist: DistanceField | None, n: int) -> np.ndarray:
    """Resolve the per-node stamp colors for an overlay."""
    colors = np.tile(DEFAULT_NODE_COLOR, (n, 1))
    if spec.mode == "distance-bands":
        if dist is None:
            raise ValueError("distance-bands overlay needs a distance field")
        d = dist.dist
        in_band = (d >= 0) & (d < len(DISTANCE_BAND_COLORS))
        colors[:] = _BLACK  # unreached or d > 6
        colors[in_band] = DISTANCE_BAND_COLORS[d[in_band]]
    elif spec.mode == "category":
        if spec.categories is None:
            raise ValueError("category overlay needs per-node categories")
        palette = category_palette()
        explicit = spec.category_colors or {}
        uniq, inverse = np.unique(np.asarray(spec.categories, dtype=object), return_inverse=True)
        table = np.stack([
            np.array(explicit[c], np.uint8) if c in explicit else category_color(str(c), palette)
            for c in uniq
        ])
        colors = table[inverse]
    elif spec.mode == "event-time":
        t = np.asarray(spec.event_times, dtype=np.float64)
        marked = ~np.isnan(t)
        if spec.time_window is not None:
            t0, t1 = spec.time_window
            marked &= (t >= t0) & (t <= t1)
        colors[marked] = cooling_color(t[marked])
    return colors


def _stamp_offsets(radius: int) -> np.ndarray:
    out = [
        (dx, dy)
        for dy in range(-radius, radius + 1)
        for dx in range(-radius, radius + 1)
        if dx * dx + dy * dy <= radius * radius
    ]
    return np.array(out, np.int64)


def rasterize(
    view: FocalView,
    spec: OverlaySpec,
    width: int = 1024,
    stamp: int = 1,
    threads: int = 1,
    background: tuple[int, int, int] = (255, 255, 255),
    keep: np.ndarray | None = None,
    coords: np.ndarray | None = None,
) -> DensityRaster:
    """Accumulate node stamps over the [-1,1]^2 plane into a width^2 raster.

    Bin counts and color sums are integers, so output is byte-identical
    for any `threads` (shards only split the accumulation).
    """
    if width < 16:
        raise ValueError("width must be >= 16")
    uv = view.coords if coords is None else coords
    colors = node_colors(spec, view.dist, len(uv))
    if keep is not None:
        uv = uv[keep]
        colors = colors[keep]
    return _rasterize_points(uv, colors, width, stamp, threads, background)


def _rasterize_points(uv, colors, width, stamp, threads, background) -> DensityRaster:
    h = w = width
    px = np.minimum((np.clip(uv[:, 0], -1.0, 1.0) + 1.0) * 0.5 * w, w - 1).astype(np.int64)
    py = np.minimum((np.clip(uv[:, 1], -1.0, 1.0) + 1.0) * 0.5 * h, h - 1).astype(np.int64)
    bins = np.zeros(h * w, np.int64)
    channels = np.zeros((h * w, 3), np.int64)
    offsets = _stamp_offsets(stamp)
    shards = np.array_split(np.arange(len(px)), max(1, threads))
    for shard in shards:
        if shard.size == 0:
            continue
        for dx, dy in offsets:
            xs = px[shard] + dx
            ys = py[shard] + dy
            ok = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
            idx = ys[ok] * w + xs[ok]
            bins += np.bincount(idx, minlength=h * w)
            sel = shard[ok]
            for c in range(3):
                channels[:, c] += np.bincount(
                    idx, weights=colors[sel, c].astype(np.int64), minlength=h * w
                ).astype(np.int64)
    return DensityRaster(
        width=w,
        height=h,
        bins=bins.reshape(h, w),
        channels=channels.reshape(h, w, 3),
        background=np.array(background, np.uint8),
    )


def hemisphere_density(
    embedding: Embedding,
    spec: OverlaySpec | None = None,
    width: int = 1024,
    stamp: int = 0,
    threads: int = 1,
) -> tuple[DensityRaster, DensityRaster]:
    """Two Lambert projections from opposite poles, each holding one hemisphere.

    Nodes with x3 >= 0 go to the first raster (centered at the north
    pole), the rest to the second; every node lands in exactly one.
    """
    spec = spec or OverlaySpec()
    pos = embedding.positions
    north = pos[:, 2] >= 0.0
    colors = node_colors(spec, None, len(pos))
    mirrored = pos.copy()
    mirrored[:, 2] = -mirrored[:, 2]
    uv_n = lambert_project(pos[north])
    uv_s = lambert_project(mirrored[~north])
    ra = _rasterize_points(uv_n, colors[north], width, stamp, threads, (255, 255, 255))
    rb = _rasterize_points(uv_s, colors[~north], width, stamp, threads, (255, 255, 255))
    return ra, rb


def render_animation(
    embeddings: list[Embedding],
    graph: Graph,
    focal: int,
    spec: OverlaySpec,
    params: FocalParams | None = None,
    width: int = 1024,
    stamp: int = 1,
    present: list[np.ndarray] | None = None,
) -> list[dict]:
    """Render a frame per embedding, rotationally aligned to the previous frame.

    The focal node may drift between frames, which after re-centering
    shows up as an arbitrary rotation about the projection axis; each
    frame is counter-rotated to minimize coordinate deviations of the
    nodes shared with the previous frame. `present` optionally masks the
    nodes that exist in each frame (for growing graphs).
    """
    distances = bfs_distances(graph, focal)
    frames: list[dict] = []
    prev_coords: np.ndarray | None = None
    prev_mask: np.ndarray | None = None
    for k, emb in enumerate(embeddings):
        p = params or FocalParams(focal=focal, d_max=_meta_dmax(emb), alpha=0.8)
        view = make_focal_view(emb, graph, p, distances=distances)
        mask = present[k] if present is not None else np.ones(len(view.coords), bool)
        coords = view.coords
        phi = 0.0
        degenerate = False
        if prev_coords is not None:
            # nodes clamped onto the antipode ring carry no azimuth
            # information, so they are excluded from the alignment fit
            informative = (
                mask & prev_mask
                & (np.linalg.norm(coords, axis=1) < 1.0 - 1e-9)
                & (np.linalg.norm(prev_coords, axis=1) < 1.0 - 1e-9)
            )
            phi, degenerate = align_rotation(
                prev_coords, coords, ids=np.flatnonzero(informative)
            )
            coords = rotate_plane(coords, phi)
        raster = rasterize(view, spec, width=width, stamp=stamp, keep=mask, coords=coords)
        frames.append({"raster": raster, "rotation": phi, "degenerate_alignment": degenerate})
        prev_coords = coords
        prev_mask = mask
    return frames


def _meta_dmax(embedding: Embedding) -> float:
    focal_meta = embedding.meta.get("focal", {})
    if "d_max" in focal_meta:
        return float(focal_meta["d_max"])
    raise ValueError("no d_max in embedding metadata; pass FocalParams explicitly")


def draw_edges(
    view: FocalView, graph: Graph, width: int = 1024, threads: int = 1
) -> DensityRaster:
    """Diagnostic great-circle edge drawing for small graphs (<= 2000 nodes)."""
    if graph.node_count > 2000:
        raise ValueError("edge drawing is a small-graph diagnostic (<= 2000 nodes)")
    # edges are sampled in 3D so they follow great circles through the projection
    from .geometry import normalize as _norm

    pts = []
    pos = _unproject(view.coords)
    for a, b in graph.edge_array():
        pa, pb = pos[a], pos[b]
        steps = max(2, int(np.ceil(np.arccos(np.clip(pa @ pb, -1, 1)) / 0.02)))
        for t in np.linspace(0.0, 1.0, steps):
            try:
                pts.append(slerp(pa, pb, float(t)))
            except ValueError:
                pts.append(_norm(pa + pb) if 0.0 < t < 1.0 else (pa if t == 0 else pb))
    uv = lambert_project(np.array(pts))
    colors = np.tile(np.array((120, 120, 130), np.uint8), (len(uv), 1))
    return _rasterize_points(uv, colors, width, 0, threads, (255, 255, 255))


def _unproject(uv: np.ndarray) -> np.ndarray:
    """Inverse Lambert: plane disk back to the unit sphere."""
    r2 = np.sum(uv * uv, axis=1)
    z = 1.0 - 2.0 * np.clip(r2, 0.0, 1.0)
    scale = np.sqrt(np.maximum(4.0 - 4.0 * r2, 0.0))
    out = np.stack([scale * uv[:, 0], scale * uv[:, 1], z], axis=1)
    n = np.linalg.norm(out, axis=1, keepdims=True)
    return out / np.where(n == 0, 1.0, n)


def load_events(source, graph: Graph) -> np.ndarray:
    """Read a `node_label<TAB>event_time` TSV into normalized per-node times.

    Times are mapped linearly onto [0, 1] over the observed range; nodes
    without an event get NaN. Labels not present in the graph are ignored.
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    raw = np.full(graph.node_count, np.nan)
    index = graph.label_index
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"events line {line_no}: expected 2 columns")
        i = index.get(parts[0])
        if i is None:
            continue
        value = float(parts[1])
        if np.isnan(raw[i]) or value < raw[i]:
            raw[i] = value
    have = ~np.isnan(raw)
    if np.any(have):
        lo = float(np.nanmin(raw))
        hi = float(np.nanmax(raw))
        span = hi - lo
        if span > 0:
            raw[have] = (raw[have] - lo) / span
        else:
            raw[have] = 0.5
    return raw
