"""Command line entry point ``qlsync``.

Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import graph as gc
from .errors import NumericError, ParameterError, QLSyncError
from .scenario import emit_csv, emit_json, emit_svg, load_config, records_from_run, simulate_ensemble, sweep_coupling

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("qlsync")


def _parse_k_list(text: str) -> list[float]:
    try:
        ks = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ParameterError(f"--K: expected comma-separated numbers, got {text!r}") from None
    if not ks:
        raise ParameterError("--K: need at least one value")
    return ks


def _graph_from_spec(spec: dict) -> gc.BiasedGraph:
    """Build a graph from a JSON spec.

    Either a serialized graph (``n``, ``edges``, ``blocks``) or
    ``{"type": ..., ...}`` with type one of cycle, complete, d_regular,
    ql_bit, ql_product, cartesian (``factors``: list of specs).
    """
    if "edges" in spec:
        return gc.BiasedGraph.from_dict(spec)
    kind = spec.get("type")
    seed = spec.get("seed", 0)

    def bias(key):
        v = spec.get(key, 1.0)
        return complex(*v) if isinstance(v, list) else complex(v)

    try:
        if kind == "cycle":
            return gc.cycle_graph(int(spec["n"]))
        if kind == "complete":
            return gc.complete_graph(int(spec["n"]))
        if kind == "d_regular":
            return gc.gen_d_regular_random(int(spec["n"]), int(spec["d"]), seed)
        if kind == "ql_bit":
            return gc.ql_bit(int(spec["n0"]), int(spec["d"]), float(spec.get("p", 0.2)), bias("bias"), seed)
        if kind == "ql_product":
            return gc.ql_product(
                int(spec["n0"]), int(spec["d"]), float(spec.get("p", 0.2)), bias("bias_a"), bias("bias_b"), seed
            )
        if kind == "cartesian":
            factors = [_graph_from_spec(f) for f in spec["factors"]]
            out = factors[0]
            for f in factors[1:]:
                out = gc.cartesian_product(out, f)
            return out
    except KeyError as exc:
        raise ParameterError(f"graph spec of type {kind!r} is missing {exc}") from None
    raise ParameterError(f"unknown graph spec type {kind!r}")


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.out_dir) if args.out_dir else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    run = simulate_ensemble(cfg, workers=args.workers)
    records = records_from_run(run)
    csv_path = Path(cfg.outputs.csv) if cfg.outputs.csv else out_dir / f"{cfg.name}.csv"
    json_path = Path(cfg.outputs.json) if cfg.outputs.json else out_dir / f"{cfg.name}.json"
    if args.out_dir:
        csv_path, json_path = out_dir / csv_path.name, out_dir / json_path.name
    emit_csv(records, csv_path)
    emit_json(records, cfg, json_path, extra={"emergent_gap": run.top_gap})
    written = [csv_path, json_path]
    if args.svg or cfg.outputs.svg:
        svg_path = csv_path.with_suffix(".svg")
        emit_svg(records, svg_path, title=cfg.name)
        written.append(svg_path)
    last = records[-1]
    print(f"{cfg.name}: t={last.t:g} periods  order_mod={last.order_mod:.4f}  purity={last.purity:.4f}")
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    rows = sweep_coupling(cfg, _parse_k_list(args.K), workers=args.workers)
    print("K,final_order_mod,final_purity")
    for r in rows:
        print(f"{r.K:.12g},{r.final_order_mod:.12g},{r.final_purity:.12g}")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for r in rows:
            emit_csv(r.records, out / f"{cfg.name}_K{r.K:g}.csv")
    return EXIT_OK


def cmd_graph(args) -> int:
    with open(args.spec, encoding="utf-8") as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"invalid JSON in {args.spec}: {exc}") from None
    g = _graph_from_spec(spec)
    if args.out:
        Path(args.out).write_text(g.to_json(), encoding="utf-8")
    if args.dump:
        s = gc.spectrum(g)
        info = {
            "n": g.n,
            "n_edges": int(np.count_nonzero(np.triu(g.adjacency, 1))),
            "blocks": {k: len(v) for k, v in g.blocks.items()},
            "eigenvalues": [float(v) for v in s.eigenvalues],
            "top_eigenvalue": float(s.eigenvalues[-1]),
            "spectral_gap": gc.spectral_gap(s) if g.n > 1 else None,
        }
        print(json.dumps(info, indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qlsync", description="QL state spaces of synchronizing oscillator networks")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("--config", required=True)
    r.add_argument("--out-dir")
    r.add_argument("--svg", action="store_true")
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a scenario for several coupling strengths")
    s.add_argument("--config", required=True)
    s.add_argument("--K", required=True, help="comma-separated list, e.g. 100,200,400")
    s.add_argument("--out-dir")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    g = sub.add_parser("graph", help="build a graph and report its spectrum")
    g.add_argument("--spec", required=True)
    g.add_argument("--dump", action="store_true", help="print spectrum and spectral gap as JSON")
    g.add_argument("--out", help="write the graph JSON here")
    g.set_defaults(func=cmd_graph)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except QLSyncError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
