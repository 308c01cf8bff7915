"""Graph ingestion, synthetic generators, BFS distances and node orderings.

Graphs are immutable compact-adjacency (CSR) structures over dense node
indices 0..n-1, always undirected, deduplicated and free of self-loops.
An optional label map keeps dense indices joinable with the source data,
and optional per-node timestamps drive the temporal ordering used by the
multi-level layout.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse
from scipy.sparse.csgraph import connected_components

from ._kernels import bfs_kernel

UNREACHED = -1


class EdgeListParseError(ValueError):
    """Malformed input line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptyGraphError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    """Undirected graph as CSR adjacency over dense indices."""

    indptr: np.ndarray  # int64, len n+1
    indices: np.ndarray  # int32, len 2*edge_count, sorted within each row
    labels: tuple[str, ...] | None = None
    node_times: np.ndarray | None = None  # int64 per node

    @property
    def node_count(self) -> int:
        return len(self.indptr) - 1

    @property
    def edge_count(self) -> int:
        return self.indices.size // 2

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def degree(self, i: int) -> int:
        return int(self.indptr[i + 1] - self.indptr[i])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def label_of(self, i: int) -> str:
        return self.labels[i] if self.labels is not None else str(i)

    @cached_property
    def label_index(self) -> dict[str, int]:
        if self.labels is not None:
            return {lab: i for i, lab in enumerate(self.labels)}
        return {str(i): i for i in range(self.node_count)}

    @cached_property
    def structure_hash(self) -> str:
        h = hashlib.sha256()
        h.update(str(self.node_count).encode())
        h.update(self.indptr.tobytes())
        h.update(self.indices.tobytes())
        return h.hexdigest()

    def edge_array(self) -> np.ndarray:
        """(edge_count, 2) array of unique edges with i < j."""
        src = np.repeat(np.arange(self.node_count, dtype=np.int64), self.degrees)
        dst = self.indices.astype(np.int64)
        keep = src < dst
        return np.stack([src[keep], dst[keep]], axis=1)

    def component_count(self) -> int:
        mat = scipy.sparse.csr_matrix(
            (np.ones(self.indices.size, np.int8), self.indices, self.indptr),
            shape=(self.node_count, self.node_count),
        )
        ncomp, _ = connected_components(mat, directed=False)
        return int(ncomp)


@dataclass
class DistanceField:
    """Hop distances from one source; UNREACHED (-1) marks disconnected nodes."""

    source: int
    dist: np.ndarray  # int32


def from_edges(
    n: int,
    edges: np.ndarray,
    labels: tuple[str, ...] | None = None,
    node_times: np.ndarray | None = None,
) -> Graph:
    """Build a Graph from an (m, 2) edge array: symmetrize, dedup, drop self-loops."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if n <= 0:
        raise EmptyGraphError("graph has no nodes")
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise ValueError("edge endpoint out of range")
    if edges.size:
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        keep = lo != hi
        lo, hi = lo[keep], hi[keep]
        keys = np.unique(lo * n + hi)
        lo, hi = keys // n, keys % n
    else:
        lo = hi = np.empty(0, np.int64)
    src = np.concatenate([lo, hi])
    dst = np.concatenate([hi, lo])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return Graph(
        indptr=indptr,
        indices=dst.astype(np.int32),
        labels=labels,
        node_times=node_times,
    )


def _load_tsv(text: str) -> Graph:
    label_ids: dict[str, int] = {}
    srcs: list[int] = []
    dsts: list[int] = []
    times: list[int] = []
    has_time: bool | None = None

    def intern(tok: str) -> int:
        idx = label_ids.get(tok)
        if idx is None:
            idx = len(label_ids)
            label_ids[tok] = idx
        return idx

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise EdgeListParseError(line_no, f"expected 2 or 3 columns, got {len(parts)}")
        if has_time is None:
            has_time = len(parts) == 3
        elif has_time != (len(parts) == 3):
            raise EdgeListParseError(line_no, "inconsistent timestamp column")
        a = intern(parts[0])
        b = intern(parts[1])
        srcs.append(a)
        dsts.append(b)
        if has_time:
            try:
                times.append(int(parts[2]))
            except ValueError:
                raise EdgeListParseError(line_no, f"bad timestamp {parts[2]!r}") from None
    if not label_ids:
        raise EmptyGraphError("edge list contains no edges")
    n = len(label_ids)
    edges = np.stack([np.array(srcs, np.int64), np.array(dsts, np.int64)], axis=1)
    node_times = None
    if has_time:
        node_times = np.full(n, np.iinfo(np.int64).max, np.int64)
        t = np.array(times, np.int64)
        np.minimum.at(node_times, edges[:, 0], t)
        np.minimum.at(node_times, edges[:, 1], t)
    return from_edges(n, edges, labels=tuple(label_ids), node_times=node_times)


def _load_matrix_market(data: bytes) -> Graph:
    header = data.split(b"\n", 1)[0].lower()
    if not header.startswith(b"%%matrixmarket matrix coordinate"):
        raise EdgeListParseError(1, "not a MatrixMarket coordinate file")
    mat = scipy.io.mmread(io.BytesIO(data)).tocoo()
    n = max(mat.shape)
    edges = np.stack([mat.row.astype(np.int64), mat.col.astype(np.int64)], axis=1)
    return from_edges(n, edges)


def load_edge_list(source, fmt: str = "tsv") -> Graph:
    """Load a graph from a TSV edge list or a MatrixMarket coordinate file.

    `source` may be a path, bytes, or a binary file-like object. TSV rows
    are `src dst [timestamp]`; `#` lines are comments. Dense indices are
    assigned in first-appearance order and kept in the label map.
    """
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    elif isinstance(source, bytes):
        data = source
    else:
        data = source.read()
        if isinstance(data, str):
            data = data.encode()
    if fmt == "tsv":
        return _load_tsv(data.decode("utf-8"))
    if fmt in ("matrix-market", "mm", "mtx"):
        return _load_matrix_market(data)
    raise ValueError(f"unknown edge list format {fmt!r}")


def generate_grid(w: int, h: int) -> Graph:
    """w x h lattice with 4-neighborhood edges."""
    if w < 1 or h < 1:
        raise ValueError("grid dimensions must be >= 1")
    ids = np.arange(w * h, dtype=np.int64).reshape(h, w)
    right = np.stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()], axis=1)
    down = np.stack([ids[:-1, :].ravel(), ids[1:, :].ravel()], axis=1)
    return from_edges(w * h, np.concatenate([right, down]))


def generate_watts_strogatz(n: int, k: int, p: float, seed: int) -> Graph:
    """Watts-Strogatz small world: degree-k ring lattice, each edge rewired with probability p.

    Rewiring never creates self-loops or duplicate edges, so the edge
    count stays n*k/2. Deterministic per seed.
    """
    if k % 2 != 0:
        raise ValueError("k must be even")
    if k < 2 or n <= k:
        raise ValueError("need n > k >= 2")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    rng = np.random.default_rng(seed)
    nodes = np.arange(n, dtype=np.int64)
    key_set: set[int] = set()
    rounds: list[np.ndarray] = []
    for off in range(1, k // 2 + 1):
        a = nodes
        b = (nodes + off) % n
        rounds.append(np.stack([a, b], axis=1))
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        key_set.update((lo * n + hi).tolist())
    if p > 0.0:
        for edges in rounds:
            rewire = rng.random(n) < p
            for s, old in zip(edges[rewire, 0].tolist(), edges[rewire, 1].tolist()):
                key_set.discard(min(s, old) * n + max(s, old))
                new = old  # node saturated: keep the original edge
                for _ in range(8 * n):
                    cand = int(rng.integers(n))
                    if cand != s and min(s, cand) * n + max(s, cand) not in key_set:
                        new = cand
                        break
                key_set.add(min(s, new) * n + max(s, new))
        keys = np.array(sorted(key_set), dtype=np.int64)
        edges = np.stack([keys // n, keys % n], axis=1)
    else:
        edges = np.concatenate(rounds)
    return from_edges(n, edges)


def bfs_distances(g: Graph, source: int, out: np.ndarray | None = None) -> DistanceField:
    """Exact hop distances from `source`; unreachable nodes get UNREACHED."""
    n = g.node_count
    if not 0 <= source < n:
        raise ValueError(f"source {source} out of range for {n} nodes")
    dist = out if out is not None else np.empty(n, np.int32)
    queue = np.empty(n, np.int32)
    bfs_kernel(g.indptr, g.indices, source, dist, queue)
    return DistanceField(source=source, dist=dist)


def order_random_walk(g: Graph, jump_prob: float = 0.15, seed: int = 0) -> np.ndarray:
    """First-visit order of a random walk with restarts.

    On a single-component graph, jumps go to already-visited nodes so the
    growing prefix stays connected; with several components they go to
    uniform unvisited nodes so everything gets covered. If the walk stalls
    it restarts from an unvisited node adjacent to the visited set, which
    preserves prefix connectivity.
    """
    if not 0.0 <= jump_prob <= 1.0:
        raise ValueError("jump_prob must be in [0, 1]")
    n = g.node_count
    rng = np.random.default_rng(seed)
    single_component = g.component_count() == 1
    visited = np.zeros(n, bool)
    order = np.empty(n, np.int64)
    cur = int(rng.integers(n))
    visited[cur] = True
    order[0] = cur
    count = 1
    stall = 0
    while count < n:
        if stall > 1000 + 5 * count:
            frontier = np.flatnonzero(~visited & _adjacent_to_visited(g, visited))
            pool = frontier if frontier.size else np.flatnonzero(~visited)
            cur = int(pool[rng.integers(pool.size)])
            visited[cur] = True
            order[count] = cur
            count += 1
            stall = 0
            continue
        deg = g.degree(cur)
        if deg == 0 or rng.random() < jump_prob:
            if single_component:
                cur = int(order[rng.integers(count)])
            else:
                pool = np.flatnonzero(~visited)
                cur = int(pool[rng.integers(pool.size)]) if pool.size else int(order[0])
        else:
            nbrs = g.neighbors(cur)
            cur = int(nbrs[rng.integers(deg)])
        if visited[cur]:
            stall += 1
        else:
            visited[cur] = True
            order[count] = cur
            count += 1
            stall = 0
    return order


def _adjacent_to_visited(g: Graph, visited: np.ndarray) -> np.ndarray:
    mark = np.zeros(g.node_count, bool)
    for u in np.flatnonzero(visited):
        mark[g.neighbors(u)] = True
    return mark


def order_temporal(g: Graph, seed: int = 0) -> np.ndarray:
    """Node order by ascending creation timestamp, ties shuffled per seed."""
    if g.node_times is None:
        raise ValueError("graph has no node timestamps; use order_random_walk instead")
    rng = np.random.default_rng(seed)
    tiebreak = rng.permutation(g.node_count)
    return np.lexsort((tiebreak, g.node_times)).astype(np.int64)
