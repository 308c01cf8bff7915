from __future__ import annotations

import numpy as np
import pytest

import focalsphere as fs
from focalsphere.focal import FocalParams
from focalsphere.geometry import pole_rotation_matrix, random_unit
from focalsphere.layout import Embedding
from focalsphere.render import (
    DISTANCE_BAND_COLORS,
    OverlaySpec,
    cooling_color,
    category_color,
    draw_edges,
    node_colors,
)

RNG = np.random.default_rng(404)


def small_setup(n=80, seed=0):
    g = fs.generate_watts_strogatz(n, 4, 0.1, seed)
    emb = Embedding(positions=random_unit(np.random.default_rng(seed), n))
    params = FocalParams(focal=3, d_max=4.0, alpha=1.0)
    return g, emb, params


class TestMakeFocalView:
    def test_focal_at_origin(self):
        g, emb, params = small_setup()
        view = fs.make_focal_view(emb, g, params)
        assert np.allclose(view.coords[params.focal], [0, 0], atol=1e-6)

    def test_half_dmax_radius(self):
        # a node at network distance d_max/2 lands at planar radius sin(pi/4)
        g = fs.load_edge_list(b"f\ta\na\tb\n")
        emb = Embedding(positions=random_unit(np.random.default_rng(2), 3))
        params = FocalParams(focal=g.label_index["f"], d_max=4.0, alpha=1.0)
        view = fs.make_focal_view(emb, g, params)
        b = g.label_index["b"]  # d = 2 = d_max / 2
        assert np.linalg.norm(view.coords[b]) == pytest.approx(
            np.sin(np.pi / 4), abs=1e-6
        )

    def test_equal_distance_ring(self):
        g, emb, params = small_setup()
        view = fs.make_focal_view(emb, g, params)
        radius = np.linalg.norm(view.coords, axis=1)
        d = view.dist.dist
        for dd in range(1, 4):
            ring = radius[(d == dd)]
            if ring.size > 1:
                expect = np.sin(min(1.0, dd / params.d_max) * np.pi / 2)
                assert np.allclose(ring, expect, atol=1e-6)

    def test_out_of_range_focal(self):
        g, emb, _ = small_setup()
        with pytest.raises(ValueError):
            fs.make_focal_view(emb, g, FocalParams(focal=999, d_max=4.0))


class TestRasterize:
    def test_transparency_rule(self):
        g, emb, params = small_setup()
        view = fs.make_focal_view(emb, g, params)
        raster = fs.rasterize(view, OverlaySpec(), width=64, stamp=0)
        op = raster.opacity()
        assert np.all(op[raster.bins == 0] == 0.0)
        assert np.allclose(op, raster.bins / (1.0 + raster.bins))
        rgba = raster.rgba()
        expect_alpha = np.round(255.0 * raster.bins / (1.0 + raster.bins)).astype(np.uint8)
        assert np.array_equal(rgba[..., 3], expect_alpha)

    def test_small_counts(self):
        # transparency 1/(1+n): n=1 -> 0.5, n=3 -> 0.25
        emb = Embedding(positions=np.tile([[0.0, 0.0, 1.0]], (3, 1)))
        g = fs.from_edges(3, [(0, 1), (1, 2), (0, 2)])
        view = fs.make_focal_view(emb, g, FocalParams(focal=0, d_max=2.0, alpha=0.0))
        raster = fs.rasterize(view, OverlaySpec(), width=32, stamp=0)
        center = raster.bins[16, 16]
        assert center == 3
        assert 1.0 / (1.0 + center) == pytest.approx(0.25)

    def test_opacity_monotone_bounded(self):
        n = np.array([0, 1, 2, 4, 8, 1000])
        op = n / (1.0 + n)
        assert np.all(np.diff(op) > 0)
        assert np.all(op < 1.0)

    def test_stamp_conservation(self):
        g, emb, params = small_setup()
        view = fs.make_focal_view(emb, g, params)
        for stamp in (0, 1, 2):
            raster = fs.rasterize(view, OverlaySpec(), width=128, stamp=stamp)
            offsets = sum(
                1
                for dy in range(-stamp, stamp + 1)
                for dx in range(-stamp, stamp + 1)
                if dx * dx + dy * dy <= stamp * stamp
            )
            assert raster.bins.sum() <= len(emb.positions) * offsets
            if stamp == 0:
                assert raster.bins.sum() == len(emb.positions)

    def test_byte_determinism_across_threads(self):
        g, emb, params = small_setup(200, 3)
        view = fs.make_focal_view(emb, g, params)
        spec = OverlaySpec(mode="distance-bands")
        pngs = {
            t: fs.rasterize(view, spec, width=256, stamp=1, threads=t).png_bytes()
            for t in (1, 2, 5)
        }
        assert pngs[1] == pngs[2] == pngs[5]

    def test_width_validation(self):
        g, emb, params = small_setup()
        view = fs.make_focal_view(emb, g, params)
        with pytest.raises(ValueError):
            fs.rasterize(view, OverlaySpec(), width=8)


class TestOverlays:
    def test_distance_band_colors(self):
        g = fs.from_edges(9, [(i, i + 1) for i in range(8)])  # path: d = index
        dist = fs.bfs_distances(g, 0)
        colors = node_colors(OverlaySpec(mode="distance-bands"), dist, 9)
        for i in range(7):
            assert np.array_equal(colors[i], DISTANCE_BAND_COLORS[i])
        assert np.array_equal(colors[7], [0, 0, 0])  # d = 7 -> black
        assert np.array_equal(colors[8], [0, 0, 0])

    def test_unreached_black(self):
        g = fs.from_edges(3, [(0, 1)])
        dist = fs.bfs_distances(g, 0)
        colors = node_colors(OverlaySpec(mode="distance-bands"), dist, 3)
        assert np.array_equal(colors[2], [0, 0, 0])

    def test_cooling_anchors(self):
        assert np.array_equal(cooling_color(np.array([0.0]))[0], [255, 0, 0])
        assert np.array_equal(cooling_color(np.array([0.25]))[0], [255, 255, 0])
        assert np.array_equal(cooling_color(np.array([0.5]))[0], [0, 200, 0])
        assert np.array_equal(cooling_color(np.array([0.75]))[0], [0, 64, 255])
        assert np.array_equal(cooling_color(np.array([1.0]))[0], [255, 255, 255])

    def test_event_time_window(self):
        t = np.array([0.1, 0.5, 0.9, np.nan])
        spec = OverlaySpec(mode="event-time", event_times=t, time_window=(0.4, 0.6))
        colors = node_colors(spec, None, 4)
        assert np.array_equal(colors[1], cooling_color(np.array([0.5]))[0])
        # outside the window / no event: neutral color
        assert not np.array_equal(colors[0], cooling_color(np.array([0.1]))[0])
        assert np.array_equal(colors[0], colors[3])

    def test_event_mode_requires_times(self):
        with pytest.raises(ValueError):
            OverlaySpec(mode="event-time")

    def test_category_colors_stable(self):
        a = category_color("physics")
        b = category_color("physics")
        assert np.array_equal(a, b)
        spec = OverlaySpec(
            mode="category",
            categories=np.array(["a", "b", "a"], dtype=object),
        )
        colors = node_colors(spec, None, 3)
        assert np.array_equal(colors[0], colors[2])
        assert not np.array_equal(colors[0], colors[1])

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            OverlaySpec(mode="rainbow")


class TestHemispheres:
    def test_pole_node_centered_in_north(self):
        emb = Embedding(positions=np.array([[0.0, 0, 1.0]]))
        a, b = fs.hemisphere_density(emb, width=64)
        assert a.bins[32, 32] == 1
        assert b.bins.sum() == 0

    def test_equator_goes_north(self):
        emb = Embedding(positions=np.array([[1.0, 0, 0.0]]))
        a, b = fs.hemisphere_density(emb, width=64)
        assert a.bins.sum() == 1 and b.bins.sum() == 0

    def test_partition(self):
        emb = Embedding(positions=random_unit(np.random.default_rng(0), 5000))
        a, b = fs.hemisphere_density(emb, width=256)
        assert a.bins.sum() + b.bins.sum() == 5000


class TestAnimation:
    def test_identical_frames_identical_rasters(self):
        g, emb, params = small_setup()
        frames = fs.render_animation(
            [emb, emb], g, focal=params.focal, spec=OverlaySpec(),
            params=params, width=128,
        )
        assert frames[0]["raster"].png_bytes() == frames[1]["raster"].png_bytes()
        assert frames[1]["rotation"] == pytest.approx(0.0, abs=1e-9)

    def test_rotated_frame_realigned(self):
        g, emb, _ = small_setup()
        # d_max large enough that no node lands exactly on the antipode
        params = FocalParams(focal=3, d_max=10.0, alpha=1.0)
        # second frame: globally rotated about the focal axis
        focal_pos = emb.positions[params.focal]
        r_to_pole = pole_rotation_matrix(focal_pos)
        spin = 0.45
        c, s = np.cos(spin), np.sin(spin)
        spin_mat = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])
        rotated = (emb.positions @ r_to_pole.T) @ spin_mat.T @ r_to_pole
        emb2 = Embedding(positions=rotated)
        frames = fs.render_animation(
            [emb, emb2], g, focal=params.focal, spec=OverlaySpec(),
            params=params, width=128,
        )
        assert abs(frames[1]["rotation"]) == pytest.approx(spin, abs=1e-6)
        assert frames[0]["raster"].png_bytes() == frames[1]["raster"].png_bytes()

    def test_growing_graph_masks(self):
        g, emb, params = small_setup()
        present = [np.arange(80) < 40, np.ones(80, bool)]
        frames = fs.render_animation(
            [emb, emb], g, focal=params.focal, spec=OverlaySpec(),
            params=params, width=128, present=present,
        )
        assert frames[0]["raster"].bins.sum() < frames[1]["raster"].bins.sum()


class TestEdgeDrawing:
    def test_small_graph_only(self):
        g, emb, params = small_setup()
        view = fs.make_focal_view(emb, g, params)
        raster = draw_edges(view, g, width=128)
        assert raster.bins.sum() > 0

    def test_rejects_large(self):
        g = fs.generate_watts_strogatz(2500, 4, 0.0, 0)
        emb = Embedding(positions=random_unit(RNG, 2500))
        view = fs.make_focal_view(emb, g, FocalParams(focal=0, d_max=4.0, alpha=0.0))
        with pytest.raises(ValueError):
            draw_edges(view, g, width=64)


class TestLoadEvents:
    def test_normalization(self, tmp_path):
        g = fs.load_edge_list(b"a\tb\nb\tc\n")
        p = tmp_path / "events.tsv"
        p.write_text("a\t2000\nc\t2010\n")
        t = fs.load_events(p, g)
        assert t[g.label_index["a"]] == 0.0
        assert t[g.label_index["c"]] == 1.0
        assert np.isnan(t[g.label_index["b"]])

    def test_single_event_midpoint(self, tmp_path):
        g = fs.load_edge_list(b"a\tb\n")
        p = tmp_path / "events.tsv"
        p.write_text("a\t1999\n")
        t = fs.load_events(p, g)
        assert t[g.label_index["a"]] == 0.5

    def test_unknown_labels_ignored(self, tmp_path):
        g = fs.load_edge_list(b"a\tb\n")
        p = tmp_path / "events.tsv"
        p.write_text("zz\t5\na\t7\n")
        t = fs.load_events(p, g)
        assert not np.isnan(t[g.label_index["a"]])
