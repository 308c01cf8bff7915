from __future__ import annotations

import numpy as np
import pytest
from fastapi.testclient import TestClient

import focalsphere as fs
from focalsphere.geometry import random_unit
from focalsphere.layout import Embedding
from focalsphere.service import build_session, create_app


@pytest.fixture(scope="module")
def session():
    g = fs.generate_watts_strogatz(300, 4, 0.05, 2)
    emb = Embedding(positions=random_unit(np.random.default_rng(0), 300))
    events = np.full(300, np.nan)
    events[[10, 20, 30]] = [0.1, 0.5, 0.9]
    return build_session(g, emb, events=events, seed=0)


@pytest.fixture(scope="module")
def client(session):
    return TestClient(create_app(session))


class TestMeta:
    def test_before_load_503(self):
        bare = TestClient(create_app(None))
        assert bare.get("/meta").status_code == 503
        assert bare.get("/focal/0").status_code == 503

    def test_counts_and_dmax(self, client):
        meta = client.get("/meta").json()
        assert meta["nodes"] == 300 and meta["edges"] == 600
        assert meta["d_max"] > 0
        assert "event-time" in meta["overlays"]


class TestFocalEndpoint:
    def test_png_with_timing_headers(self, client):
        r = client.get("/focal/5", params={"width": 128})
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        assert r.content[:8] == b"\x89PNG\r\n\x1a\n"
        for header in ("bfs_ms", "render_ms", "encode_ms"):
            assert float(r.headers[header]) >= 0

    def test_center_pixel_marked(self, client):
        import io

        from PIL import Image

        r = client.get("/focal/5", params={"width": 64, "alpha": 0.5})
        img = np.asarray(Image.open(io.BytesIO(r.content)))
        assert img[32, 32, 3] > 0  # focal stamp is at the projection center

    def test_bad_alpha_400(self, client):
        assert client.get("/focal/5", params={"alpha": 2}).status_code == 400

    def test_bad_width_400(self, client):
        assert client.get("/focal/5", params={"width": 4}).status_code == 400

    def test_non_numeric_param_400(self, client):
        assert client.get("/focal/5", params={"alpha": "abc"}).status_code == 400

    def test_unknown_label_404(self, client):
        assert client.get("/focal/no-such-node").status_code == 404

    def test_identical_requests_byte_identical(self, client):
        a = client.get("/focal/7", params={"width": 128, "alpha": 0.8})
        b = client.get("/focal/7", params={"width": 128, "alpha": 0.8})
        assert a.content == b.content

    def test_event_overlay_with_window(self, client):
        full = client.get("/focal/10", params={
            "width": 128, "overlay": "event-time"})
        narrow = client.get("/focal/10", params={
            "width": 128, "overlay": "event-time", "t0": 0.4, "t1": 0.6})
        assert full.status_code == narrow.status_code == 200
        assert full.content != narrow.content

    def test_refit_flag(self, client):
        r = client.get("/focal/5", params={"width": 64, "refit": "true"})
        assert r.status_code == 200


class TestSelectable:
    def test_neighbors_plus_events(self, client, session):
        r = client.get("/focal/5/selectable")
        assert r.status_code == 200
        body = r.json()
        labels = [e["label"] for e in body["nodes"]]
        assert labels[0] == "5"
        neighbors = {session.graph.label_of(int(j)) for j in session.graph.neighbors(5)}
        assert neighbors <= set(labels)
        event_labels = {"10", "20", "30"}
        assert event_labels <= set(labels)
        assert len(labels) <= 1 + len(neighbors) + 3

    def test_coordinates_in_unit_disk(self, client):
        body = client.get("/focal/9/selectable").json()
        for e in body["nodes"]:
            assert e["u"] ** 2 + e["v"] ** 2 <= 1.0 + 1e-9

    def test_event_times_attached(self, client):
        body = client.get("/focal/10/selectable").json()
        by_label = {e["label"]: e for e in body["nodes"]}
        assert by_label["20"]["t"] == pytest.approx(0.5)

    def test_unknown_404(self, client):
        assert client.get("/focal/zz/selectable").status_code == 404


class TestSearch:
    def test_exact_match_first(self, client):
        body = client.get("/search", params={"q": "42"}).json()
        assert body["matches"][0]["label"] == "42"

    def test_no_match_empty_200(self, client):
        r = client.get("/search", params={"q": "zzz"})
        assert r.status_code == 200
        assert r.json()["matches"] == []

    def test_cap_50(self, client):
        body = client.get("/search", params={"q": "1"}).json()
        assert len(body["matches"]) <= 50

    def test_empty_query_400(self, client):
        assert client.get("/search").status_code == 400
        assert client.get("/search", params={"q": ""}).status_code == 400

    def test_deterministic_order(self, client):
        a = client.get("/search", params={"q": "2"}).json()
        b = client.get("/search", params={"q": "2"}).json()
        assert a == b
