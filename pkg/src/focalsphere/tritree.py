"""Subdivided-icosahedron hierarchy with per-cell mass centers.

The spherical analogue of a Barnes-Hut quadtree: 20 root triangles, each
recursively split into 4. Cell membership is decided by barycentric
descent in the root triangle's plane (decision borders at lambda = 0.5),
so a cell's children partition it exactly and a node's cells form one
root-to-leaf path. Mesh vertices are re-projected onto the sphere at
every subdivision (standard geodesic construction).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .geometry import normalize


@dataclass(frozen=True)
class TriangleMesh:
    """Triangulated sphere surface: unit vertices plus consistently wound faces."""

    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray  # (F, 3) int32

    @property
    def face_count(self) -> int:
        return len(self.faces)

    def face_vertices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        v = self.vertices
        f = self.faces
        return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]

    def face_normals(self) -> np.ndarray:
        """Outward unit plane normals n_t."""
        v1, v2, v3 = self.face_vertices()
        n = np.cross(v2 - v1, v3 - v1)
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def edge_lengths(self) -> np.ndarray:
        v1, v2, v3 = self.face_vertices()
        return np.concatenate([
            np.linalg.norm(v2 - v1, axis=1),
            np.linalg.norm(v3 - v2, axis=1),
            np.linalg.norm(v1 - v3, axis=1),
        ])


def build_icosahedron() -> TriangleMesh:
    """Regular icosahedron: poles at (0,0,+-1) plus two staggered pentagons."""
    c = np.cos(np.arctan(0.5))
    verts = [np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0])]
    for i in range(10):
        a = i * np.pi / 5.0
        verts.append(c * np.array([np.cos(a), np.sin(a), (-1.0) ** i / 2.0]))
    vertices = np.array(verts)
    faces = []
    for k in range(5):  # north cap, ids 0..4
        faces.append((0, 2 + 2 * k, 2 + (2 * k + 2) % 10))
    for i in range(10):  # middle band, ids 5..14
        faces.append((2 + i, 2 + (i + 1) % 10, 2 + (i + 2) % 10))
    for k in range(5):  # south cap, ids 15..19
        faces.append((1, 2 + (2 * k + 1) % 10, 2 + (2 * k + 3) % 10))
    faces = np.array(faces, np.int32)
    # orient every face outward: det(v1, v2, v3) > 0
    v1, v2, v3 = vertices[faces[:, 0]], vertices[faces[:, 1]], vertices[faces[:, 2]]
    flip = np.einsum("ij,ij->i", np.cross(v1, v2), v3) < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return TriangleMesh(vertices=vertices, faces=faces)


def subdivide(mesh: TriangleMesh, levels: int) -> list[TriangleMesh]:
    """Refine `levels` times, bisecting every edge and re-projecting midpoints.

    Returns [mesh, level1, ..., levelN]; level l has 4**l times the faces.
    Children of face f are 4f..4f+3 in the order corner1, corner2,
    corner3, center, matching the barycentric descent.
    """
    if levels < 0:
        raise ValueError("levels must be >= 0")
    out = [mesh]
    for _ in range(levels):
        cur = out[-1]
        verts = [v for v in cur.vertices]
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            idx = cache.get(key)
            if idx is None:
                idx = len(verts)
                verts.append(normalize(verts[a] + verts[b]))
                cache[key] = idx
            return idx

        faces = np.empty((cur.face_count * 4, 3), np.int32)
        for f, (a, b, c) in enumerate(cur.faces):
            mab = midpoint(a, b)
            mbc = midpoint(b, c)
            mca = midpoint(c, a)
            faces[4 * f + 0] = (a, mab, mca)
            faces[4 * f + 1] = (mab, b, mbc)
            faces[4 * f + 2] = (mca, mbc, c)
            faces[4 * f + 3] = (mab, mbc, mca)
        out.append(TriangleMesh(vertices=np.array(verts), faces=faces))
    return out


@lru_cache(maxsize=4)
def _meshes_for(max_level: int) -> list[TriangleMesh]:
    return subdivide(build_icosahedron(), max_level)


@lru_cache(maxsize=1)
def _root_data() -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, float]:
    """Kernel-side root geometry: vertex triples, normals, sector candidate table."""
    base = build_icosahedron()
    v1, v2, v3 = base.face_vertices()
    rn = base.face_normals()
    # azimuth sector s covers [s*pi/5, (s+1)*pi/5); per hemisphere the only
    # face candidates are the cap face over that sector plus the two
    # overlapping middle-band faces
    table = np.full((10, 2, 4), -1, np.int32)
    for s in range(10):
        north = [s // 2, 5 + (s - 1) % 10, 5 + s]
        ks = (s - 1) // 2 if s % 2 == 1 else (s // 2 - 1) % 5
        south = [15 + ks % 5, 5 + (s - 1) % 10, 5 + s]
        table[s, 0, : len(north)] = sorted(north)
        table[s, 1, : len(south)] = sorted(south)
    edge = float(np.arccos(np.clip(np.sum(v1[0] * v2[0]), -1.0, 1.0)))
    return (
        np.ascontiguousarray(v1),
        np.ascontiguousarray(v2),
        np.ascontiguousarray(v3),
        np.ascontiguousarray(rn),
        table,
        edge,
    )


def root_cell_and_barycentric(p: np.ndarray) -> tuple[int, np.ndarray]:
    """Root face hit by the ray through p, with its planar barycentric coordinates."""
    rv1, rv2, rv3, rn, table, _ = _root_data()
    p = normalize(np.asarray(p, dtype=np.float64))
    f, l1, l2, l3 = _kernels.root_bary_kernel(p[0], p[1], p[2], rv1, rv2, rv3, rn, table)
    return int(f), np.array([l1, l2, l3])


@dataclass
class TriangleTree:
    """Repulsion-approximation index: per-cell node counts and mass-center sums.

    The structure (meshes, root tables) is built once; `refill` re-runs the
    per-step accumulation for new positions without touching the topology.
    """

    max_level: int
    meshes: list[TriangleMesh]
    edge_angles: np.ndarray  # per level
    level_off: np.ndarray  # flat-array offset per level
    positions: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    sums: np.ndarray = field(repr=False)
    leaf_start: np.ndarray = field(repr=False)
    leaf_members: np.ndarray = field(repr=False)
    leaf_of: np.ndarray = field(repr=False)
    active_count: int = 0

    @property
    def leaf_cells(self) -> int:
        return 20 * 4**self.max_level

    def level_counts(self, level: int) -> np.ndarray:
        return self.counts[self.level_off[level]:self.level_off[level + 1]]

    def cell_count(self, level: int, cell: int) -> int:
        return int(self.counts[self.level_off[level] + cell])

    def cell_center(self, level: int, cell: int) -> np.ndarray:
        s = self.sums[self.level_off[level] + cell]
        return normalize(s)

    def cell_members(self, leaf: int) -> np.ndarray:
        return self.leaf_members[self.leaf_start[leaf]:self.leaf_start[leaf + 1]]

    def locate(self, p: np.ndarray) -> np.ndarray:
        """Cell path (one id per level 0..max_level) for a unit vector."""
        rv1, rv2, rv3, rn, table, _ = _root_data()
        p = normalize(np.asarray(p, dtype=np.float64))
        out = np.empty(1, np.int64)
        _kernels.locate_kernel(
            p[None, :], np.zeros(1, np.int64), rv1, rv2, rv3, rn, table,
            self.max_level, out,
        )
        leaf = int(out[0])
        return np.array([leaf // 4 ** (self.max_level - l) for l in range(self.max_level + 1)])

    def refill(self, positions: np.ndarray, active: np.ndarray | None = None) -> None:
        """Re-run the accumulation pass for new positions (same topology)."""
        pos = np.ascontiguousarray(positions, dtype=np.float64)
        n = len(pos)
        rv1, rv2, rv3, rn, table, _ = _root_data()
        ids = np.arange(n, dtype=np.int64) if active is None else np.flatnonzero(active).astype(np.int64)
        leaf = np.empty(len(ids), np.int64)
        _kernels.locate_kernel(pos, ids, rv1, rv2, rv3, rn, table, self.max_level, leaf)
        nleaf = self.leaf_cells
        counts_l = np.bincount(leaf, minlength=nleaf).astype(np.int64)
        sums_l = np.empty((nleaf, 3))
        for c in range(3):
            sums_l[:, c] = np.bincount(leaf, weights=pos[ids, c], minlength=nleaf)
        per_level_counts = [counts_l]
        per_level_sums = [sums_l]
        for _ in range(self.max_level):
            per_level_counts.append(per_level_counts[-1].reshape(-1, 4).sum(axis=1))
            per_level_sums.append(per_level_sums[-1].reshape(-1, 4, 3).sum(axis=1))
        self.counts = np.concatenate(per_level_counts[::-1])
        self.sums = np.concatenate(per_level_sums[::-1], axis=0)
        order = np.argsort(leaf, kind="stable")
        self.leaf_members = ids[order].astype(np.int32)
        self.leaf_start = np.zeros(nleaf + 1, np.int64)
        np.cumsum(counts_l, out=self.leaf_start[1:])
        self.leaf_of = np.full(n, -1, np.int64)
        self.leaf_of[ids] = leaf
        self.positions = pos
        self.active_count = len(ids)

    def approximate_repulsors(
        self, p: np.ndarray, opening: float, exclude: int = -1
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Mass-center approximation of all repulsors acting on p.

        Returns (centers, weights, ids): cells far enough away (spherical
        distance above opening * cell edge angle) contribute their mass
        center with their member count as weight; closer cells are refined
        down to individual leaf members (ids >= 0, weight 1). `exclude`
        names a node whose path is always refined and who is dropped at
        the leaf, so weights sum to active_count - 1.
        """
        if opening <= 0:
            raise ValueError("opening must be positive")
        p = normalize(np.asarray(p, dtype=np.float64))
        own_leaf = int(self.leaf_of[exclude]) if 0 <= exclude < len(self.leaf_of) else -1
        cap = self.active_count + 1
        centers = np.empty((cap, 3))
        weights = np.empty(cap, np.int64)
        ids = np.empty(cap, np.int64)
        k = _kernels.repulsors_kernel(
            p[0], p[1], p[2], own_leaf,
            self.counts, self.sums, self.level_off, self.edge_angles,
            self.leaf_start, self.leaf_members, self.positions,
            float(opening), self.max_level, exclude,
            centers, weights, ids,
        )
        return centers[:k], weights[:k], ids[:k]


def build_tree(
    positions: np.ndarray, max_level: int = 6, active: np.ndarray | None = None
) -> TriangleTree:
    """Build the index and run the accumulation pass for `positions`."""
    if len(positions) == 0:
        raise ValueError("positions must be non-empty")
    if not 0 <= max_level <= 12:
        raise ValueError("max_level out of range")
    *_, edge = _root_data()
    meshes = _meshes_for(max_level)
    cells = [20 * 4**l for l in range(max_level + 1)]
    level_off = np.zeros(max_level + 2, np.int64)
    np.cumsum(cells, out=level_off[1:])
    tree = TriangleTree(
        max_level=max_level,
        meshes=meshes,
        edge_angles=np.array([edge / 2**l for l in range(max_level + 1)]),
        level_off=level_off,
        positions=np.empty((0, 3)),
        counts=np.empty(0, np.int64),
        sums=np.empty((0, 3)),
        leaf_start=np.empty(0, np.int64),
        leaf_members=np.empty(0, np.int32),
        leaf_of=np.empty(0, np.int64),
    )
    tree.refill(positions, active)
    return tree
