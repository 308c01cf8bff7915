"""Batch entry points: layout, focal rendering, quality metrics, thread benchmark, serving.

Every command writes a run manifest next to its output; re-running the
recorded command with threads=1 reproduces the outputs byte-for-byte.
Exit codes: 0 ok, 2 bad arguments, 3 unreadable/invalid input, 4 numeric
degeneracy.
"""

from __future__ import annotations

import argparse
import difflib
import hashlib
import json
import platform
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .focal import DegenerateFitError, FocalParams, fit_dmax_for
from .geometry import IllConditionedError
from .graphs import (
    EdgeListParseError,
    EmptyGraphError,
    Graph,
    bfs_distances,
    generate_grid,
    generate_watts_strogatz,
    load_edge_list,
)
from .layout import Embedding, LayoutConfig, load_embedding, run_layout, save_embedding
from .metrics import UndefinedCorrelationError, quality_report
from .render import OverlaySpec, load_events, make_focal_view, rasterize

EXIT_OK = 0
EXIT_ARGS = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4


def _machine_info() -> dict:
    import os

    return {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "cpus": os.cpu_count(),
    }


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_path: Path, command: list[str], config: dict,
                    inputs: dict, outputs: list[str], timings: dict, seed: int) -> None:
    manifest = {
        "command": command,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
        "timings_s": timings,
        "seed": seed,
        "machine": _machine_info(),
    }
    Path(str(out_path) + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True)
    )


def parse_generator(spec: str) -> Graph:
    """`ws:n,k,p[,seed]` or `grid:w,h`."""
    kind, _, rest = spec.partition(":")
    parts = rest.split(",") if rest else []
    if kind == "ws":
        if len(parts) not in (3, 4):
            raise ValueError("ws generator needs n,k,p[,seed]")
        n, k = int(parts[0]), int(parts[1])
        p = float(parts[2])
        seed = int(parts[3]) if len(parts) == 4 else 0
        return generate_watts_strogatz(n, k, p, seed)
    if kind == "grid":
        if len(parts) != 2:
            raise ValueError("grid generator needs w,h")
        return generate_grid(int(parts[0]), int(parts[1]))
    raise ValueError(f"unknown generator {kind!r} (expected ws: or grid:)")


def _load_graph(args) -> tuple[Graph, dict]:
    if args.generate:
        return parse_generator(args.generate), {"generate": args.generate}
    if args.input:
        path = Path(args.input)
        if not path.exists():
            raise FileNotFoundError(path)
        fmt = args.format
        if fmt == "auto":
            fmt = "matrix-market" if path.suffix in (".mtx", ".mm") else "tsv"
        return load_edge_list(path, fmt=fmt), {str(path): _sha256(path)}
    raise ValueError("one of --input or --generate is required")


def _layout_config(args, node_count: int) -> LayoutConfig:
    return LayoutConfig(
        steps=args.steps,
        theta_max0=args.theta_max,
        opening=args.opening,
        multilevel=args.multilevel,
        growth_end=args.growth_end,
        seed=args.seed,
        threads=args.threads,
        max_level=args.max_level,
    )


def cmd_layout(args) -> int:
    graph, inputs = _load_graph(args)
    config = _layout_config(args, graph.node_count)
    t0 = time.perf_counter()
    embedding = run_layout(graph, config)
    layout_s = time.perf_counter() - t0
    out = Path(args.out)
    save_embedding(embedding, out, graph)
    _write_manifest(
        out, sys.argv[1:], asdict(config), inputs,
        [str(out), str(out) + ".json"], {"layout": layout_s}, config.seed,
    )
    print(f"layout: {graph.node_count} nodes, {graph.edge_count} edges, "
          f"{embedding.meta['steps']} steps in {layout_s:.2f}s -> {out}")
    return EXIT_OK


def _resolve_focal(graph: Graph, label: str) -> int:
    idx = graph.label_index.get(label)
    if idx is None:
        close = difflib.get_close_matches(label, list(graph.label_index), n=5)
        hint = f"; similar: {', '.join(close)}" if close else ""
        raise ValueError(f"unknown node label {label!r}{hint}")
    return idx


def cmd_focal(args) -> int:
    graph, inputs = _load_graph(args)
    embedding = load_embedding(args.embedding, graph)
    inputs[args.embedding] = _sha256(Path(args.embedding))
    if not 0.0 <= args.alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    focal = _resolve_focal(graph, args.focal)
    t0 = time.perf_counter()
    d_max, _ = fit_dmax_for(graph, embedding, seed=args.seed)
    params = FocalParams(focal=focal, d_max=d_max, alpha=args.alpha)
    events = load_events(args.events, graph) if args.events else None
    window = None
    if args.t0 is not None or args.t1 is not None:
        window = (args.t0 if args.t0 is not None else 0.0,
                  args.t1 if args.t1 is not None else 1.0)
    spec = OverlaySpec(mode=args.overlay, event_times=events, time_window=window)
    view = make_focal_view(embedding, graph, params)
    raster = rasterize(view, spec, width=args.width, threads=args.threads)
    out = Path(args.out)
    out.write_bytes(raster.png_bytes(compress_level=6))
    meta = {
        "focal": args.focal,
        "alpha": args.alpha,
        "d_max": d_max,
        "width": args.width,
        "overlay": args.overlay,
        "colormap": "cooling-red-yellow-green-blue-white",
    }
    Path(str(out) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    _write_manifest(out, sys.argv[1:], meta, inputs,
                    [str(out), str(out) + ".json"],
                    {"render": time.perf_counter() - t0}, args.seed)
    print(f"focal view of {args.focal!r} (alpha={args.alpha}, d_max={d_max:.3f}) -> {out}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    graph, inputs = _load_graph(args)
    embedding = load_embedding(args.embedding, graph)
    inputs[args.embedding] = _sha256(Path(args.embedding))
    t0 = time.perf_counter()
    report = quality_report(graph, embedding, seed=args.seed)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text)
        _write_manifest(Path(args.out), sys.argv[1:], {"seed": args.seed}, inputs,
                        [args.out], {"metrics": time.perf_counter() - t0}, args.seed)
    print(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    import numba

    graph, inputs = _load_graph(args)
    thread_counts = [int(t) for t in args.threads_list.split(",")]
    steps = args.steps if args.steps is not None else 100
    max_threads = numba.config.NUMBA_NUM_THREADS
    rows = []
    # warm-up run compiles the kernels so timings measure the simulation
    warm = LayoutConfig(steps=2, seed=args.seed, threads=1, multilevel=False)
    run_layout(graph, warm)
    for t in thread_counts:
        eff = min(t, max_threads)
        config = LayoutConfig(steps=steps, seed=args.seed, threads=eff, multilevel=False)
        t0 = time.perf_counter()
        run_layout(graph, config)
        wall = time.perf_counter() - t0
        rows.append({"threads_requested": t, "threads_used": eff, "seconds": wall})
    base = rows[0]["seconds"]
    for row in rows:
        row["speedup"] = base / row["seconds"]
    result = {
        "steps": steps,
        "nodes": graph.node_count,
        "edges": graph.edge_count,
        "rows": rows,
        "machine": _machine_info(),
    }
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
        _write_manifest(Path(args.out), sys.argv[1:], {"steps": steps}, inputs,
                        [args.out], {"bench": sum(r["seconds"] for r in rows)}, args.seed)
    print(text)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import build_session, create_app

    graph, _ = _load_graph(args)
    embedding = load_embedding(args.embedding, graph)
    events = load_events(args.events, graph) if args.events else None
    session = build_session(graph, embedding, events=events, seed=args.seed)
    app = create_app(session)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="focalsphere",
        description="Spherical layout and focal-view rendering for large graphs",
    )
    parser.add_argument("--config", help="JSON file of option defaults (flags override)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_graph_opts(p):
        p.add_argument("--input", help="edge list file (TSV or MatrixMarket)")
        p.add_argument("--generate", help="synthetic graph: ws:n,k,p[,seed] or grid:w,h")
        p.add_argument("--format", default="auto", choices=["auto", "tsv", "matrix-market"])
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("layout", help="compute a global spherical layout")
    add_graph_opts(p)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--theta-max", dest="theta_max", type=float, default=0.26)
    p.add_argument("--opening", type=float, default=1.0)
    p.add_argument("--multilevel", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--growth-end", dest="growth_end", type=float, default=0.3)
    p.add_argument("--max-level", dest="max_level", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_layout)

    p = sub.add_parser("focal", help="render a focal view PNG")
    add_graph_opts(p)
    p.add_argument("--embedding", required=True)
    p.add_argument("--focal", required=True, help="node label to center")
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--width", type=int, default=1024)
    p.add_argument("--overlay", default="distance-bands",
                   choices=["none", "distance-bands", "category", "event-time"])
    p.add_argument("--events", help="node_label<TAB>event_time TSV")
    p.add_argument("--t0", type=float, default=None)
    p.add_argument("--t1", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_focal)

    p = sub.add_parser("metrics", help="layout quality report")
    add_graph_opts(p)
    p.add_argument("--embedding", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="thread-scaling benchmark")
    add_graph_opts(p)
    p.add_argument("--threads-list", default="1,2,4",
                   help="comma-separated thread counts")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the focal-exploration HTTP service")
    add_graph_opts(p)
    p.add_argument("--embedding", required=True)
    p.add_argument("--events")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8040)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    # config file provides defaults; explicit flags win because argparse
    # only falls back to defaults for options the user did not pass
    if "--config" in argv:
        pre, _ = parser.parse_known_args(argv)
        if pre.config:
            try:
                defaults = json.loads(Path(pre.config).read_text())
            except OSError as exc:
                print(f"error: cannot read config: {exc}", file=sys.stderr)
                return EXIT_INPUT
            for p in [parser] + list(parser._subparsers._group_actions[0].choices.values()):
                known = {a.dest for a in p._actions}
                p.set_defaults(**{k: v for k, v in defaults.items() if k in known})
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (EdgeListParseError, EmptyGraphError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DegenerateFitError, UndefinedCorrelationError, IllConditionedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
