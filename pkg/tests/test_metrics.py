from __future__ import annotations

import json

import numpy as np
import pytest

import focalsphere as fs
from focalsphere.geometry import pole_rotation_matrix, random_unit
from focalsphere.layout import Embedding
from focalsphere.metrics import UndefinedCorrelationError
from focalsphere.sampling import stratified_pairs

from conftest import random_graph

RNG = np.random.default_rng(55)


def complete_graph(n):
    iu = np.triu_indices(n, 1)
    return fs.from_edges(n, np.stack(iu, axis=1))


class TestNormAvgEdgeLength:
    def test_complete_graph_is_one(self):
        g = complete_graph(12)
        emb = Embedding(positions=random_unit(RNG, 12))
        assert fs.norm_avg_edge_length(g, emb) == pytest.approx(1.0, abs=1e-12)

    def test_hand_enumerated_example(self):
        # antipodal connected pair plus one node at pi/2 from both:
        # edge mean pi, pair mean (pi + pi/2 + pi/2)/3, ratio 1.5
        g = fs.from_edges(3, [(0, 1)])
        emb = Embedding(positions=np.array([
            [0.0, 0, 1.0], [0.0, 0, -1.0], [1.0, 0, 0.0],
        ]))
        assert fs.norm_avg_edge_length(g, emb) == pytest.approx(1.5, rel=1e-12)

    def test_rotation_invariant(self):
        g = random_graph(40, 0.1, 1)
        pos = random_unit(RNG, 40)
        r = pole_rotation_matrix(random_unit(RNG))
        a = fs.norm_avg_edge_length(g, Embedding(positions=pos))
        b = fs.norm_avg_edge_length(g, Embedding(positions=pos @ r.T))
        assert a == pytest.approx(b, rel=1e-9)

    def test_no_edges_errors(self):
        g = fs.from_edges(5, np.empty((0, 2)))
        with pytest.raises(ValueError):
            fs.norm_avg_edge_length(g, Embedding(positions=random_unit(RNG, 5)))

    def test_sampled_denominator_close_to_full(self):
        g = random_graph(300, 0.05, 2)
        pos = random_unit(np.random.default_rng(8), 300)
        full = fs.norm_avg_edge_length(g, Embedding(positions=pos))
        import focalsphere.metrics as m

        sampled = m.norm_avg_edge_length(
            g, Embedding(positions=pos), seed=1, pair_sample=200_000
        )
        assert full == sampled  # n <= 2000 always enumerates


def embedding_with_theta_proportional_to_d(g, c=0.35, seed=0):
    """Synthetic embedding where sampled pairs satisfy theta ~= c*d."""
    dist = fs.bfs_distances(g, 0)
    rng = np.random.default_rng(seed)
    n = g.node_count
    pos = np.empty((n, 3))
    for i in range(n):
        theta = min(c * max(dist.dist[i], 0), np.pi)
        phi = rng.uniform(0, 2 * np.pi)
        pos[i] = [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)]
    return Embedding(positions=pos)


class TestDistanceCorrelation:
    def test_perfect_linear_relation(self):
        # theta exactly proportional to d for the pairs of one BFS tree:
        # build positions on a "cone ladder" around the source
        g = fs.from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])
        pos = np.empty((6, 3))
        for i in range(6):
            theta = 0.4 * i
            pos[i] = [np.sin(theta), 0.0, np.cos(theta)]
        rho, _ = fs.distance_correlation(g, Embedding(positions=pos), seed=0)
        assert rho == pytest.approx(1.0, abs=1e-9)

    def test_random_embedding_uncorrelated(self):
        g = fs.generate_watts_strogatz(1000, 4, 0.02, 0)
        emb = Embedding(positions=random_unit(np.random.default_rng(4), 1000))
        rho, _ = fs.distance_correlation(g, emb, seed=0)
        assert abs(rho) < 0.05

    def test_zero_variance_errors(self):
        g = fs.from_edges(4, [(0, 1), (0, 2), (0, 3)])  # all pairs d in {1, 2}
        pos = np.tile(np.array([[0.0, 0, 1.0]]), (4, 1))
        with pytest.raises(UndefinedCorrelationError):
            fs.distance_correlation(g, Embedding(positions=pos), seed=0)

    def test_single_stratum_errors(self):
        g = complete_graph(5)  # every pair at distance 1
        with pytest.raises(UndefinedCorrelationError):
            fs.distance_correlation(g, Embedding(positions=random_unit(RNG, 5)), seed=0)

    def test_rotation_invariant(self):
        g = random_graph(80, 0.06, 5)
        pos = random_unit(np.random.default_rng(2), 80)
        r = pole_rotation_matrix(random_unit(np.random.default_rng(3)))
        a, _ = fs.distance_correlation(g, Embedding(positions=pos), seed=7)
        b, _ = fs.distance_correlation(g, Embedding(positions=pos @ r.T), seed=7)
        assert a == pytest.approx(b, abs=1e-9)

    def test_sampled_close_to_exhaustive(self):
        g = fs.generate_watts_strogatz(200, 4, 0.05, 1)
        emb = embedding_with_theta_proportional_to_d(g, seed=1)
        full, _ = fs.distance_correlation(g, emb, seed=0)  # exhaustive (n <= 2000)
        for seed in range(10):
            i, j, d, spec = stratified_pairs(g, seed=seed, exhaustive=False)
            from focalsphere.sampling import pair_angles

            theta = pair_angles(emb.positions, i, j)
            rho = float(np.corrcoef(d.astype(float), theta)[0, 1])
            assert rho == pytest.approx(full, abs=0.02)


class TestStratifiedSampler:
    def test_equal_strata_or_exhausted(self):
        g = fs.generate_watts_strogatz(500, 4, 0.05, 2)
        i, j, d, spec = stratified_pairs(g, seed=3, per_stratum=200)
        counts = spec["strata"]
        for dist_value, count in counts.items():
            assert count <= 200
        # middle strata of a 500-node small world have plenty of pairs
        assert counts[3] == 200 and counts[4] == 200

    def test_reproducible_per_seed(self):
        g = fs.generate_watts_strogatz(300, 4, 0.05, 2)
        a = stratified_pairs(g, seed=9, per_stratum=100)
        b = stratified_pairs(g, seed=9, per_stratum=100)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_pairs_have_correct_distances(self):
        g = fs.generate_watts_strogatz(100, 4, 0.1, 0)
        i, j, d, _ = stratified_pairs(g, seed=0, per_stratum=50)
        for a, b, dd in list(zip(i, j, d))[:100]:
            assert fs.bfs_distances(g, int(a)).dist[b] == dd


class TestQualityReport:
    def test_schema(self):
        g = fs.generate_watts_strogatz(100, 4, 0.1, 0)
        emb = Embedding(positions=random_unit(np.random.default_rng(0), 100))
        report = fs.quality_report(g, emb, seed=0)
        payload = json.loads(report.to_json())
        assert set(payload) == {"norm_avg_edge_len", "rho", "sample"}
        assert np.isfinite(payload["norm_avg_edge_len"])
        assert -1 <= payload["rho"] <= 1

    def test_deterministic(self):
        g = fs.generate_watts_strogatz(100, 4, 0.1, 0)
        emb = Embedding(positions=random_unit(np.random.default_rng(0), 100))
        assert fs.quality_report(g, emb, seed=5).to_json() == \
            fs.quality_report(g, emb, seed=5).to_json()
