"""Node-pair sampling shared by the quality metrics and the d_max fit.

Sampling is stratified by network distance so short distances, which are
vastly outnumbered by long ones, stay represented. Small graphs are
enumerated exactly; large ones are sampled from BFS trees of a seeded
set of source nodes.
"""

from __future__ import annotations

import math

import numpy as np

from .graphs import Graph, bfs_distances

EXHAUSTIVE_LIMIT = 2000


def stratified_pairs(
    graph: Graph,
    seed: int = 0,
    n_sources: int = 32,
    per_stratum: int = 10_000,
    max_distance: int = 6,
    exhaustive: bool | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict]:
    """Sample node pairs with equal counts per network distance 1..max_distance.

    Returns (i, j, d, spec). Strata with fewer than `per_stratum`
    available pairs contribute everything they have. Exhaustive mode
    (default for graphs up to 2000 nodes) enumerates all pairs before
    subsampling; otherwise pairs come from BFS trees of `n_sources`
    seeded sources.
    """
    n = graph.node_count
    if exhaustive is None:
        exhaustive = n <= EXHAUSTIVE_LIMIT
    rng = np.random.default_rng(seed)
    dist = np.empty(n, np.int32)
    strata: dict[int, list[np.ndarray]] = {d: [] for d in range(1, max_distance + 1)}
    if exhaustive:
        sources = np.arange(n)
        quota = None
    else:
        # pairs sampled from one BFS tree are correlated through the shared
        # source, so small graphs need proportionally more sources for the
        # estimate to track the exhaustive value
        eff = n_sources if n > 512 else max(n_sources, 128)
        sources = np.sort(rng.choice(n, size=min(eff, n), replace=False))
        quota = math.ceil(per_stratum / len(sources))
    for s in sources:
        bfs_distances(graph, int(s), out=dist)
        for d in range(1, max_distance + 1):
            at_d = np.flatnonzero(dist == d)
            if exhaustive:
                at_d = at_d[at_d > s]  # dedup: count each unordered pair once
            elif at_d.size > quota:
                at_d = rng.choice(at_d, size=quota, replace=False)
            if at_d.size:
                lo = np.minimum(at_d, s)
                hi = np.maximum(at_d, s)
                strata[d].append(lo.astype(np.int64) * n + hi)
    keys_i, keys_j, keys_d, counts = [], [], [], {}
    for d in range(1, max_distance + 1):
        if not strata[d]:
            counts[d] = 0
            continue
        keys = np.concatenate(strata[d])
        if not exhaustive:
            keys = np.unique(keys)
        if keys.size > per_stratum:
            keys = rng.choice(keys, size=per_stratum, replace=False)
        counts[d] = int(keys.size)
        keys_i.append(keys // n)
        keys_j.append(keys % n)
        keys_d.append(np.full(keys.size, d, np.int32))
    spec = {
        "seed": seed,
        "sources": int(len(sources)),
        "per_stratum": per_stratum,
        "max_distance": max_distance,
        "exhaustive": bool(exhaustive),
        "strata": counts,
    }
    if not keys_i:
        return (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int32), spec)
    return (
        np.concatenate(keys_i),
        np.concatenate(keys_j),
        np.concatenate(keys_d),
        spec,
    )


def all_reachable_pairs(graph: Graph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Every unordered reachable pair with its hop distance (quadratic; small graphs only)."""
    n = graph.node_count
    if n > 4000:
        raise ValueError("all-pairs enumeration is limited to 4000 nodes")
    dist = np.empty(n, np.int32)
    out_i, out_j, out_d = [], [], []
    for s in range(n):
        bfs_distances(graph, s, out=dist)
        reach = np.flatnonzero(dist > 0)
        reach = reach[reach > s]
        if reach.size:
            out_i.append(np.full(reach.size, s, np.int64))
            out_j.append(reach.astype(np.int64))
            out_d.append(dist[reach].astype(np.int32))
    if not out_i:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int32)
    return np.concatenate(out_i), np.concatenate(out_j), np.concatenate(out_d)


def pair_angles(positions: np.ndarray, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Spherical distances for index pairs (vectorized)."""
    dots = np.einsum("ij,ij->i", positions[i], positions[j])
    return np.arccos(np.clip(dots, -1.0, 1.0))
