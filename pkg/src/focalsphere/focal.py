"""Focal correction: move every node toward its ideal radial distance.

After the global layout, spherical distances to a chosen focal node only
roughly track network distances. This stage fits d_max (the network
distance that should map to the antipode) and then pulls each node along
the great circle through the focal node until its radial angle matches
min(1, d/d_max) * pi, with strength alpha in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import perturb_tangent
from .graphs import DistanceField, Graph
from .layout import Embedding
from .sampling import all_reachable_pairs, pair_angles, stratified_pairs

ANGLE_EPS = 1e-7  # arccos working floor; see geometry.DEGENERATE_EPS


class DegenerateFitError(RuntimeError):
    """All sampled spherical distances are zero; d_max cannot be fitted."""


@dataclass
class FocalParams:
    focal: int
    d_max: float
    alpha: float = 0.8

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.d_max <= 0.0:
            raise ValueError("d_max must be positive")


def fit_dmax(d: np.ndarray, theta: np.ndarray) -> float:
    """Least-squares d_max for d = (d_max/pi) * theta through the origin."""
    d = np.asarray(d, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if d.size == 0:
        raise DegenerateFitError("no pairs to fit")
    denom = float(np.sum(theta * theta))
    if denom <= 0.0:
        raise DegenerateFitError("all spherical distances are zero")
    return float(np.pi * np.sum(d * theta) / denom)


def fit_dmax_for(
    graph: Graph,
    embedding: Embedding,
    seed: int = 0,
    exhaustive: bool | None = None,
) -> tuple[float, dict]:
    """Fit d_max from a stratified pair sample (full enumeration for small graphs)."""
    n = graph.node_count
    if exhaustive is None:
        exhaustive = n <= 2000
    if exhaustive:
        i, j, d = all_reachable_pairs(graph)
        spec = {"exhaustive": True, "pairs": int(d.size)}
    else:
        i, j, d, spec = stratified_pairs(graph, seed=seed)
    theta = pair_angles(embedding.positions, i, j)
    return fit_dmax(d, theta), spec


def focal_adjust(
    embedding: Embedding, distances: DistanceField, params: FocalParams
) -> Embedding:
    """Move every node toward its ideal radial angle around the focal node.

    Nodes already further out than their target move toward the focal
    node, closer ones move toward its antipode, both along the connecting
    great circle so azimuths are preserved. Unreached nodes are treated
    as infinitely distant and pushed toward the antipode ring.
    """
    if distances.source != params.focal:
        raise ValueError("distance field source does not match the focal node")
    pos = embedding.positions.copy()
    n = len(pos)
    f = params.focal
    alpha = params.alpha
    if alpha == 0.0:
        return Embedding(positions=pos, meta=dict(embedding.meta))
    xf = pos[f].copy()
    d = distances.dist.astype(np.float64)
    reached = distances.dist >= 0
    theta_star = np.where(reached, np.minimum(1.0, d / params.d_max) * np.pi, np.pi)
    theta_star[f] = 0.0

    theta = np.arccos(np.clip(pos @ xf, -1.0, 1.0))
    outward = theta >= theta_star  # move toward the focal node
    # degenerate rows: sitting on the focal node but d > 0, or antipodal
    # while needing to move inward; a deterministic tangent nudge picks
    # the arc on which they travel
    bad = ((theta < ANGLE_EPS) & ~outward) | ((theta > np.pi - ANGLE_EPS) & outward)
    bad[f] = False
    for i in np.flatnonzero(bad):
        pos[i] = perturb_tangent(pos[i], 1e-6, int(i))
    if np.any(bad):
        theta = np.arccos(np.clip(pos @ xf, -1.0, 1.0))
        outward = theta >= theta_star

    safe_t = np.where(theta > ANGLE_EPS, theta, 1.0)
    safe_pi_t = np.where(np.pi - theta > ANGLE_EPS, np.pi - theta, 1.0)
    frac = np.where(
        outward,
        alpha * (theta - theta_star) / safe_t,
        alpha * (theta_star - theta) / safe_pi_t,
    )
    base = np.where(outward, theta, np.pi - theta)  # angle to the slerp endpoint
    sin_base = np.sin(base)
    moving = (np.abs(frac) > 0.0) & (sin_base > ANGLE_EPS)
    moving[f] = False
    idx = np.flatnonzero(moving)
    if idx.size:
        b = np.where(outward[idx, None], xf[None, :], -xf[None, :])
        s = frac[idx, None]
        ang = base[idx, None]
        new = (np.sin((1.0 - s) * ang) * pos[idx] + np.sin(s * ang) * b) / np.sin(ang)
        new /= np.linalg.norm(new, axis=1, keepdims=True)
        pos[idx] = new
    meta = dict(embedding.meta)
    meta["focal"] = {"node": f, "alpha": alpha, "d_max": params.d_max}
    return Embedding(positions=pos, meta=meta)
