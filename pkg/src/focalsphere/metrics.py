"""Layout quality measures.

Two numbers summarize a layout: the normalized average edge length (mean
spherical distance over edges divided by the mean over all node pairs;
lower is better) and the stratified Pearson correlation between network
distance and spherical distance (higher is better).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graphs import Graph
from .layout import Embedding
from .sampling import EXHAUSTIVE_LIMIT, pair_angles, stratified_pairs


class UndefinedCorrelationError(RuntimeError):
    """One of the variables has zero variance over the sample."""


@dataclass
class QualityReport:
    norm_avg_edge_len: float
    rho: float
    sample: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                "norm_avg_edge_len": self.norm_avg_edge_len,
                "rho": self.rho,
                "sample": self.sample,
            },
            indent=2,
            sort_keys=True,
        )


def norm_avg_edge_length(
    graph: Graph,
    embedding: Embedding,
    seed: int = 0,
    pair_sample: int = 1_000_000,
) -> float:
    """Mean edge angle over mean pair angle; pairs are enumerated for small graphs."""
    n = graph.node_count
    if graph.edge_count == 0:
        raise ValueError("graph has no edges")
    if n < 3:
        raise ValueError("need at least 3 nodes")
    pos = embedding.positions
    edges = graph.edge_array()
    edge_mean = float(np.mean(pair_angles(pos, edges[:, 0], edges[:, 1])))
    if n <= EXHAUSTIVE_LIMIT:
        gram = np.clip(pos @ pos.T, -1.0, 1.0)
        iu = np.triu_indices(n, k=1)
        pair_mean = float(np.mean(np.arccos(gram[iu])))
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, size=pair_sample)
        j = rng.integers(0, n, size=pair_sample)
        clash = i == j
        while np.any(clash):
            j[clash] = rng.integers(0, n, size=int(clash.sum()))
            clash = i == j
        pair_mean = float(np.mean(pair_angles(pos, i, j)))
    return edge_mean / pair_mean


def distance_correlation(
    graph: Graph,
    embedding: Embedding,
    seed: int = 0,
    n_sources: int = 32,
    per_stratum: int = 10_000,
    max_distance: int = 6,
) -> tuple[float, dict]:
    """Stratified Pearson correlation between network and spherical distance."""
    i, j, d, spec = stratified_pairs(
        graph, seed=seed, n_sources=n_sources,
        per_stratum=per_stratum, max_distance=max_distance,
    )
    occupied = sum(1 for c in spec["strata"].values() if c > 0)
    if occupied < 2:
        raise UndefinedCorrelationError(
            f"need pairs in at least 2 distance strata, got {occupied}"
        )
    theta = pair_angles(embedding.positions, i, j)
    dv = d.astype(np.float64)
    if np.std(dv) == 0.0 or np.std(theta) == 0.0:
        raise UndefinedCorrelationError("zero variance in a correlation variable")
    rho = float(np.corrcoef(dv, theta)[0, 1])
    return rho, spec


def quality_report(graph: Graph, embedding: Embedding, seed: int = 0) -> QualityReport:
    rho, spec = distance_correlation(graph, embedding, seed=seed)
    return QualityReport(
        norm_avg_edge_len=norm_avg_edge_length(graph, embedding, seed=seed),
        rho=rho,
        sample=spec,
    )
