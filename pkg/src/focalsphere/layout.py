"""Iterative spherical force simulation with optional multi-level coarsening.

Each step moves every active node to the renormalized mean of two unit
targets: an attraction target built from its network neighborhood and a
repulsion target built from the triangle-tree approximation of all other
nodes. The maximum per-step displacement cools linearly to zero over the
simulation. With multi-level enabled, the simulation starts on a small
node prefix (temporal or random-walk order) that grows linearly until
`growth_end` of the simulation time, which helps escape local minima.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import numba

from . import _kernels
from .geometry import normalize, random_unit, spherical_distance, slerp, perturb_tangent
from .graphs import Graph
from .tritree import TriangleTree, build_tree

ANGLE_EPS = 1e-7  # arccos working floor; see geometry.DEGENERATE_EPS


@dataclass
class LayoutConfig:
    steps: int | None = None  # None: 500 for <= 1000 nodes, else 250
    theta_max0: float = 0.26
    opening: float = 1.0
    multilevel: bool = True
    growth_end: float = 0.3
    seed: int = 0
    threads: int = 1
    max_level: int | None = None  # None: pick by graph size, capped at 6
    jump_prob: float = 0.15
    spawn_jitter: float = 0.2
    growth_shape: str = "linear"  # or "geometric": equal relative growth per step
    paper_repulsion_branch: bool = False  # use the published branch condition verbatim

    def __post_init__(self):
        if self.steps is not None and self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not 0.0 < self.theta_max0 < np.pi / 2:
            raise ValueError("theta_max0 must be in (0, pi/2)")
        if not 0.0 < self.growth_end <= 1.0:
            raise ValueError("growth_end must be in (0, 1]")
        if self.opening <= 0.0:
            raise ValueError("opening must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def resolved_steps(self, node_count: int) -> int:
        if self.steps is not None:
            return self.steps
        return 500 if node_count <= 1000 else 250

    def resolved_max_level(self, node_count: int) -> int:
        if self.max_level is not None:
            return self.max_level
        # aim for a handful of nodes per leaf cell; deep trees only pay
        # off once the leaves would otherwise get crowded
        return int(np.clip(np.ceil(np.log(max(node_count, 1) / 160) / np.log(4)), 2, 6))


@dataclass
class Embedding:
    """Unit-sphere coordinates for every node plus layout provenance."""

    positions: np.ndarray  # (n, 3) float64
    meta: dict = field(default_factory=dict)

    @property
    def node_count(self) -> int:
        return len(self.positions)


def default_steps(node_count: int) -> int:
    return LayoutConfig().resolved_steps(node_count)


def attraction_target(
    i: int,
    positions: np.ndarray,
    graph: Graph,
    theta_max: float,
    active: np.ndarray | None = None,
) -> np.ndarray | None:
    """Un-normalized attraction sum for node i; None when it has nothing to attract to.

    Every (active, non-coincident) neighbor contributes its capped slerp
    target weighted by squared spherical distance.
    """
    p = positions[i]
    total = np.zeros(3)
    found = False
    for j in graph.neighbors(i):
        if active is not None and not active[j]:
            continue
        theta = spherical_distance(p, positions[j])
        if theta < ANGLE_EPS:
            continue
        q = positions[j]
        if theta > np.pi - ANGLE_EPS:
            q = perturb_tangent(q, 1e-6, int(j))
            theta = spherical_distance(p, q)
        t = min(1.0, theta_max / theta)
        total += theta * theta * slerp(p, q, t)
        found = True
    return total if found else None


def repulsion_target(
    x_i: np.ndarray, x_j: np.ndarray, theta_max: float, paper_branch: bool = False
) -> np.ndarray:
    """Unit point exactly theta_max beyond x_i on the great circle away from x_j."""
    theta = spherical_distance(x_i, x_j)
    if theta < ANGLE_EPS or theta > np.pi - ANGLE_EPS:
        x_j = perturb_tangent(x_j, 1e-6, 1)
        theta = spherical_distance(x_i, x_j)
    t = _kernels._rep_target.py_func(
        x_i[0], x_i[1], x_i[2], x_j[0], x_j[1], x_j[2], theta, theta_max, paper_branch
    )
    return np.array(t)


def repulsion_displacement(
    x_i: np.ndarray, repulsor: np.ndarray, weight: float, theta_max: float,
    paper_branch: bool = False,
) -> np.ndarray:
    """One repulsor's contribution to the repulsion sum: weight/theta times its target."""
    theta = spherical_distance(x_i, repulsor)
    if theta < ANGLE_EPS or theta > np.pi - ANGLE_EPS:
        repulsor = perturb_tangent(repulsor, 1e-6, 1)
        theta = spherical_distance(x_i, repulsor)
    return (weight / theta) * repulsion_target(x_i, repulsor, theta_max, paper_branch)


def step(
    positions: np.ndarray,
    graph: Graph,
    tree: TriangleTree,
    t: float,
    config: LayoutConfig,
    active: np.ndarray | None = None,
    jitter_salt: int = 0,
) -> np.ndarray:
    """One synchronous simulation step at time fraction t; returns new positions.

    All force evaluations read the pre-step snapshot; the tree must have
    been (re)filled from exactly these positions.
    """
    pos = np.ascontiguousarray(positions, dtype=np.float64)
    n = len(pos)
    theta_max = (1.0 - t) * config.theta_max0
    if theta_max <= 0.0:
        return pos.copy()
    mask = np.ones(n, np.uint8) if active is None else active.astype(np.uint8)
    out = np.empty_like(pos)
    stacks = np.empty((numba.get_num_threads(), _kernels.STACK_CAP), np.int64)
    _kernels.step_kernel(
        pos, out, mask, graph.indptr, graph.indices,
        tree.counts, tree.sums, tree.level_off, tree.edge_angles,
        tree.leaf_start, tree.leaf_members, tree.leaf_of,
        float(theta_max), float(config.opening), tree.max_level,
        np.uint64(jitter_salt), config.paper_repulsion_branch, stacks,
    )
    return out


def _growth_schedule(
    n: int, steps: int, growth_end: float, shape: str = "linear"
) -> tuple[int, np.ndarray]:
    """Active-prefix size per step, from max(2, 0.5% of n) to n at growth_end."""
    m0 = min(n, max(2, round(0.005 * n)))
    gsteps = max(1, round(growth_end * steps))
    sizes = np.empty(steps, np.int64)
    for s in range(steps):
        frac = min(1.0, s / gsteps)
        if shape == "geometric":
            sizes[s] = round(m0 * (n / m0) ** frac)
        else:
            sizes[s] = round(m0 + frac * (n - m0))
    return m0, sizes


def run_layout(graph: Graph, config: LayoutConfig | None = None) -> Embedding:
    """Compute the global spherical layout of a graph."""
    config = config or LayoutConfig()
    n = graph.node_count
    if n == 0:
        raise ValueError("cannot lay out an empty graph")
    steps = config.resolved_steps(n)
    t_start = time.perf_counter()

    seq = np.random.SeedSequence(config.seed)
    ss_init, ss_order, ss_spawn, ss_jitter = seq.spawn(4)
    rng_init = np.random.default_rng(ss_init)
    positions = random_unit(rng_init, n)
    jitter_salts = np.random.default_rng(ss_jitter).integers(
        0, 2**63, size=steps, dtype=np.int64
    ).astype(np.uint64)

    multilevel = config.multilevel and n > 4
    if multilevel:
        from .graphs import order_random_walk, order_temporal

        order_seed = int(np.random.default_rng(ss_order).integers(2**31))
        if graph.node_times is not None:
            order = order_temporal(graph, seed=order_seed)
        else:
            order = order_random_walk(graph, jump_prob=config.jump_prob, seed=order_seed)
        m0, sizes = _growth_schedule(n, steps, config.growth_end, config.growth_shape)
        active = np.zeros(n, bool)
        active[order[:m0]] = True
        m_prev = m0
    else:
        active = np.ones(n, bool)

    rng_spawn = np.random.default_rng(ss_spawn)
    max_threads = numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(min(config.threads, max_threads))
    gsteps = max(1, round(config.growth_end * steps)) if multilevel else 0
    try:
        tree = build_tree(positions, max_level=config.resolved_max_level(n), active=active)
        for s in range(steps):
            if multilevel and sizes[s] > m_prev:
                for node in order[m_prev:sizes[s]]:
                    nbrs = graph.neighbors(node)
                    act = nbrs[active[nbrs]]
                    if act.size:
                        # spawn at the mean of the already-placed neighbors:
                        # the best available guess for where the node belongs
                        base = positions[act].sum(axis=0)
                        norm = np.linalg.norm(base)
                        if norm > 1e-9:
                            positions[node] = perturb_tangent(
                                base / norm, config.spawn_jitter,
                                int(rng_spawn.integers(2**62)),
                            )
                    active[node] = True
                m_prev = int(sizes[s])
            # multilevel keeps the step budget hot while the graph is still
            # growing and anneals only once the full structure is present;
            # cooling away the budget during growth locks in bad placements
            if multilevel and s < gsteps < steps:
                t = 0.0
            elif multilevel and gsteps < steps:
                t = (s - gsteps) / (steps - gsteps)
            else:
                t = s / steps
            tree.refill(positions, active)
            positions = step(
                positions, graph, tree, t, config,
                active=active, jitter_salt=int(jitter_salts[s]),
            )
    finally:
        numba.set_num_threads(max_threads)

    meta = {
        "config": asdict(config),
        "steps": steps,
        "seed": config.seed,
        "graph_hash": graph.structure_hash,
        "wall_time_s": time.perf_counter() - t_start,
    }
    return Embedding(positions=positions, meta=meta)


def save_embedding(embedding: Embedding, path: str | Path, graph: Graph | None = None) -> None:
    """Write positions as `label\\tx1\\tx2\\tx3` TSV plus a JSON sidecar of the metadata."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for i, (x1, x2, x3) in enumerate(embedding.positions):
            label = graph.label_of(i) if graph is not None else str(i)
            fh.write(f"{label}\t{x1:.9g}\t{x2:.9g}\t{x3:.9g}\n")
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(json.dumps(embedding.meta, indent=2, sort_keys=True))


def load_embedding(path: str | Path, graph: Graph | None = None) -> Embedding:
    """Read an embedding TSV; with a graph, rows are joined to its label order."""
    path = Path(path)
    labels = []
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        lab, x1, x2, x3 = line.split("\t")
        labels.append(lab)
        rows.append((float(x1), float(x2), float(x3)))
    positions = normalize(np.array(rows))
    meta = {}
    sidecar = path.with_suffix(path.suffix + ".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
    if graph is not None:
        if len(labels) != graph.node_count:
            raise ValueError(
                f"embedding has {len(labels)} rows, graph has {graph.node_count} nodes"
            )
        index = graph.label_index
        try:
            perm = np.array([index[lab] for lab in labels])
        except KeyError as exc:
            raise ValueError(f"embedding label {exc.args[0]!r} not present in graph") from None
        ordered = np.empty_like(positions)
        ordered[perm] = positions
        positions = ordered
    return Embedding(positions=positions, meta=meta)
