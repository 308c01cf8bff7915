from __future__ import annotations

import json
from pathlib import Path

import pytest

from focalsphere.cli import main


def run(args) -> int:
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def ws_embedding(tmp_path_factory):
    """A small laid-out graph shared by the command tests."""
    d = tmp_path_factory.mktemp("cli")
    out = d / "ws.tsv"
    code = run([
        "layout", "--generate", "ws:60,4,0.1,1", "--steps", "40",
        "--seed", "3", "--out", out,
    ])
    assert code == 0
    return d, out


class TestLayoutCmd:
    def test_writes_embedding_and_manifest(self, ws_embedding):
        d, out = ws_embedding
        assert len(out.read_text().splitlines()) == 60
        sidecar = json.loads((d / "ws.tsv.json").read_text())
        assert sidecar["steps"] == 40
        manifest = json.loads((d / "ws.tsv.manifest.json").read_text())
        assert manifest["seed"] == 3
        assert str(out) in manifest["outputs"]

    def test_deterministic_rerun(self, tmp_path, ws_embedding):
        args = ["layout", "--generate", "grid:5,5", "--steps", "30",
                "--seed", "7", "--threads", "1"]
        a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
        assert run(args + ["--out", a]) == 0
        assert run(args + ["--out", b]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_missing_input_is_exit_3(self, tmp_path):
        assert run(["layout", "--input", tmp_path / "nope.tsv", "--out", tmp_path / "x"]) == 3

    def test_empty_input_is_exit_3(self, tmp_path):
        empty = tmp_path / "empty.tsv"
        empty.write_text("# nothing\n")
        assert run(["layout", "--input", empty, "--out", tmp_path / "x"]) == 3

    def test_bad_generator_is_exit_2(self, tmp_path):
        assert run(["layout", "--generate", "tree:5", "--out", tmp_path / "x"]) == 2

    def test_tsv_input(self, tmp_path):
        src = tmp_path / "g.tsv"
        src.write_text("a\tb\nb\tc\nc\ta\n")
        out = tmp_path / "emb.tsv"
        assert run(["layout", "--input", src, "--steps", "10", "--out", out]) == 0
        labels = [line.split("\t")[0] for line in out.read_text().splitlines()]
        assert labels == ["a", "b", "c"]


class TestFocalCmd:
    def test_renders_png(self, ws_embedding, tmp_path):
        d, emb = ws_embedding
        png = tmp_path / "view.png"
        code = run([
            "focal", "--generate", "ws:60,4,0.1,1", "--embedding", emb,
            "--focal", "5", "--alpha", "0.8", "--width", "128", "--out", png,
        ])
        assert code == 0
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
        meta = json.loads((tmp_path / "view.png.json").read_text())
        assert meta["alpha"] == 0.8 and meta["d_max"] > 0

    def test_alpha_sweep_changes_image(self, ws_embedding, tmp_path):
        d, emb = ws_embedding
        outs = {}
        for alpha in ("0", "1"):
            png = tmp_path / f"a{alpha}.png"
            assert run([
                "focal", "--generate", "ws:60,4,0.1,1", "--embedding", emb,
                "--focal", "5", "--alpha", alpha, "--width", "128", "--out", png,
            ]) == 0
            outs[alpha] = png.read_bytes()
        assert outs["0"] != outs["1"]

    def test_invalid_alpha_is_exit_2(self, ws_embedding, tmp_path):
        d, emb = ws_embedding
        assert run([
            "focal", "--generate", "ws:60,4,0.1,1", "--embedding", emb,
            "--focal", "5", "--alpha", "2", "--out", tmp_path / "x.png",
        ]) == 2

    def test_unknown_label_suggests(self, ws_embedding, tmp_path, capsys):
        d, emb = ws_embedding
        code = run([
            "focal", "--generate", "ws:60,4,0.1,1", "--embedding", emb,
            "--focal", "nonexistent", "--out", tmp_path / "x.png",
        ])
        assert code == 2
        assert "unknown node label" in capsys.readouterr().err


class TestMetricsCmd:
    def test_report_schema_and_determinism(self, ws_embedding, tmp_path, capsys):
        d, emb = ws_embedding
        args = ["metrics", "--generate", "ws:60,4,0.1,1", "--embedding", emb,
                "--seed", "11"]
        assert run(args) == 0
        first = capsys.readouterr().out
        assert run(args) == 0
        second = capsys.readouterr().out
        assert first == second
        payload = json.loads(first)
        assert set(payload) == {"norm_avg_edge_len", "rho", "sample"}

    def test_out_file(self, ws_embedding, tmp_path):
        d, emb = ws_embedding
        out = tmp_path / "q.json"
        assert run(["metrics", "--generate", "ws:60,4,0.1,1", "--embedding", emb,
                    "--out", out]) == 0
        assert "rho" in json.loads(out.read_text())


class TestBenchCmd:
    def test_bench_rows(self, tmp_path, capsys):
        out = tmp_path / "bench.json"
        code = run([
            "bench", "--generate", "ws:300,4,0.05,0", "--threads-list", "1,2",
            "--steps", "5", "--out", out,
        ])
        assert code == 0
        result = json.loads(out.read_text())
        assert [r["threads_requested"] for r in result["rows"]] == [1, 2]
        assert result["rows"][0]["speedup"] == 1.0
        assert "cpus" in result["machine"]


class TestConfigFile:
    def test_config_defaults_with_flag_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"steps": 12, "seed": 4}))
        out = tmp_path / "emb.tsv"
        assert run(["--config", cfg, "layout", "--generate", "grid:4,4",
                    "--out", out]) == 0
        sidecar = json.loads((tmp_path / "emb.tsv.json").read_text())
        assert sidecar["steps"] == 12 and sidecar["seed"] == 4
        out2 = tmp_path / "emb2.tsv"
        assert run(["--config", cfg, "layout", "--generate", "grid:4,4",
                    "--steps", "9", "--out", out2]) == 0
        assert json.loads((tmp_path / "emb2.tsv.json").read_text())["steps"] == 9
