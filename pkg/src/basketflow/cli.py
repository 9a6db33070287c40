"""Command line entry point: ``basketflow <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 input/parse error, 4 empty result,
5 internal invariant violation.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from pathlib import Path

from basketflow import __version__
from basketflow import pipeline as pl
from basketflow.communities import DetectConfig
from basketflow.errors import BasketflowError, InputError, ValidationError
from basketflow.flowstats import format_table, node_flow_shares, top_connections
from basketflow.ingest import SyntheticParams, generate_synthetic, posts_to_text
from basketflow.layout import LayoutConfig

log = logging.getLogger("basketflow")


def read_config_file(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment. Keys may use dashes or underscores."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError("config", f"{path}:{n}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _add_input_format(p):
    p.add_argument("--format", dest="input_format", choices=("csv", "jsonl"), default="csv")


def _add_dedup(p):
    p.add_argument("--keep-duplicates", dest="dedup", action="store_false", help="do not collapse exact duplicates")


def _add_window(p):
    p.add_argument("--window-days", type=int, default=7, help="max day gap inside one attraction set")


def _add_min_weight(p):
    p.add_argument("--min-weight", dest="min_edge_weight", type=int, default=6, help="keep edges with weight >= this")


def _add_detect(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--max-sweeps", type=int, default=100)
    p.add_argument("--min-improvement", type=float, default=1e-10)


def _add_coverage(p):
    p.add_argument("--coverage", dest="coverage_target_pct", type=float, default=80.0, help="target flow %% for the coverage subgraph")
    p.add_argument("--max-edges", dest="layout_max_edges", type=int, default=None)


def _add_flow(p):
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--centers", dest="top_centers", type=int, default=5, help="report top connections for this many highest-flow nodes")


def _add_layout(p):
    p.add_argument("--mode", dest="layout_mode", choices=("inverse", "unit"), default="inverse")
    p.add_argument("--L0", dest="display_length", type=float, default=1.0)
    p.add_argument("--K", dest="spring_constant", type=float, default=1.0)
    p.add_argument("--newton-tol", type=float, default=1e-6)
    p.add_argument("--max-outer-iters", type=int, default=None)
    p.add_argument("--tiling-gap", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="basketflow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"basketflow {__version__}")
    parser.add_argument("--config", help="key = value file supplying defaults for any flag")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic post dataset")
    p.add_argument("--posts", type=int, required=True)
    p.add_argument("--attractions", type=int, required=True)
    p.add_argument("--tourists", type=int, default=None, help="default: posts // 3")
    p.add_argument("--skew", type=float, default=1.0, help="power-law popularity exponent")
    p.add_argument("--burst-days", type=int, default=3)
    p.add_argument("--trip-posts", type=float, default=3.0, help="mean posts per trip")
    p.add_argument("--start", type=dt.date.fromisoformat, default=dt.date(2002, 6, 4))
    p.add_argument("--end", type=dt.date.fromisoformat, default=dt.date(2018, 3, 5))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", dest="output_format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("ingest", help="parse, validate and de-duplicate posts")
    p.add_argument("input")
    _add_input_format(p)
    _add_dedup(p)
    p.add_argument("-o", "--output", required=True, help="normalized posts CSV")

    p = sub.add_parser("sessionize", help="posts -> attraction sets")
    p.add_argument("input")
    _add_input_format(p)
    _add_dedup(p)
    _add_window(p)
    p.add_argument("-o", "--output", required=True, help="output directory")

    p = sub.add_parser("graph", help="attraction sets -> pruned co-occurrence graph")
    p.add_argument("input", help=pl.SETS_FILE)
    _add_min_weight(p)
    p.add_argument("--dot", action="store_true", help="also write graph.dot")
    p.add_argument("-o", "--output", required=True, help="output directory")

    p = sub.add_parser("communities", help="graph -> map-equation communities")
    p.add_argument("input", help=pl.GRAPH_FILE)
    _add_detect(p)
    p.add_argument("-o", "--output", required=True, help="output directory")

    p = sub.add_parser("flow", help="graph (+ communities) -> flow report")
    p.add_argument("input", help=pl.GRAPH_FILE)
    p.add_argument("--communities", help=pl.COMMUNITIES_FILE)
    _add_coverage(p)
    _add_flow(p)
    p.add_argument("--center", help="print the top connections of one attraction as JSON and exit")
    p.add_argument("-o", "--output", help="output directory")

    p = sub.add_parser("layout", help="graph -> Kamada-Kawai coordinates")
    p.add_argument("input", help=pl.GRAPH_FILE)
    p.add_argument("--communities", help=pl.COMMUNITIES_FILE)
    p.add_argument("--module", type=int, default=None, help="lay out one community only")
    _add_coverage(p)
    _add_layout(p)
    p.add_argument("-o", "--output", required=True, help="output directory")

    p = sub.add_parser("pipeline", help="run every phase end to end")
    p.add_argument("input")
    _add_input_format(p)
    _add_dedup(p)
    _add_window(p)
    _add_min_weight(p)
    _add_detect(p)
    _add_coverage(p)
    _add_flow(p)
    _add_layout(p)
    p.add_argument("--skip-layout", action="store_true")
    p.add_argument("-o", "--output", required=True, help="output directory")
    return parser


def _coerce(action: argparse.Action, raw: str):
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
        truthy = raw.lower() in ("1", "true", "yes", "on")
        return truthy if isinstance(action, argparse._StoreTrueAction) else not truthy
    return action.type(raw) if action.type else raw


def apply_config_defaults(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    """Load ``--config`` values as subparser defaults so the command line wins."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = read_config_file(known.config)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in subparsers.choices.values():
        by_name = {}
        for action in sp._actions:
            by_name[action.dest] = action
            for opt in action.option_strings:
                by_name[opt.lstrip("-").replace("-", "_")] = action
        defaults = {}
        for key, raw in values.items():
            action = by_name.get(key)
            if action is None or not action.option_strings:
                continue
            try:
                defaults[action.dest] = _coerce(action, raw)
            except ValueError as exc:
                raise ValidationError(key, f"bad config value {raw!r}: {exc}") from exc
            action.required = False
        sp.set_defaults(**defaults)


def _detect_cfg(a) -> DetectConfig:
    return DetectConfig(a.seed, a.trials, a.max_sweeps, a.min_improvement)


def _layout_cfg(a) -> LayoutConfig:
    return LayoutConfig(a.display_length, a.spring_constant, a.newton_tol, a.max_outer_iters, a.tiling_gap)


def _report(counts: dict) -> None:
    for k, v in counts.items():
        log.info("%s: %s", k, v)


def cmd_synth(a) -> None:
    tourists = a.tourists if a.tourists is not None else max(1, a.posts // 3)
    params = SyntheticParams(tourists, a.attractions, a.posts, (a.start, a.end), a.skew, a.burst_days, a.trip_posts)
    records = generate_synthetic(params, a.seed)
    Path(a.output).parent.mkdir(parents=True, exist_ok=True)
    Path(a.output).write_text(posts_to_text(records, a.output_format), encoding="utf-8")
    log.info("wrote %d posts to %s", len(records), a.output)


def cmd_ingest(a) -> None:
    records, counts = pl.load_posts(a.input, a.input_format, a.dedup)
    _report(counts)
    Path(a.output).parent.mkdir(parents=True, exist_ok=True)
    Path(a.output).write_text(posts_to_text(records), encoding="utf-8")


def cmd_sessionize(a) -> None:
    records, counts = pl.load_posts(a.input, a.input_format, a.dedup)
    _report(counts)
    _, counts, files = pl.phase_sessionize(records, a.window_days)
    _report(counts)
    pl.write_outputs(a.output, files)


def cmd_graph(a) -> None:
    _, counts, files = pl.phase_graph(pl.read_sets(a.input), a.min_edge_weight, a.dot)
    _report(counts)
    pl.write_outputs(a.output, files)


def cmd_communities(a) -> None:
    _, counts, files = pl.phase_communities(pl.read_graph(a.input), _detect_cfg(a))
    _report(counts)
    pl.write_outputs(a.output, files)


def cmd_flow(a) -> None:
    graph = pl.read_graph(a.input)
    if a.center is not None:
        if a.center not in graph.index:
            raise ValidationError("center", f"unknown attraction {a.center!r}")
        print(json.dumps(top_connections(graph, a.center, a.top_k).to_json(), indent=1))
        return
    if not a.output:
        raise ValidationError("output", "required unless --center is given")
    partition = pl.read_partition(graph, a.communities) if a.communities else None
    counts, files = pl.phase_flow(graph, partition, a.coverage_target_pct, a.layout_max_edges, a.top_k, a.top_centers)
    _report(counts)
    pl.write_outputs(a.output, files)
    print(format_table(node_flow_shares(graph)))


def cmd_layout(a) -> None:
    graph = pl.read_graph(a.input)
    partition = pl.read_partition(graph, a.communities) if a.communities else None
    counts, files = pl.phase_layout(
        graph, partition, a.coverage_target_pct, a.layout_max_edges, a.layout_mode, _layout_cfg(a), a.module
    )
    _report(counts)
    pl.write_outputs(a.output, files)


def cmd_pipeline(a) -> None:
    cfg = pl.PipelineConfig(
        input_path=a.input,
        input_format=a.input_format,
        output_dir=a.output,
        dedup=a.dedup,
        window_days=a.window_days,
        min_edge_weight=a.min_edge_weight,
        detect=_detect_cfg(a),
        coverage_target_pct=a.coverage_target_pct,
        layout_max_edges=a.layout_max_edges,
        top_k=a.top_k,
        top_centers=a.top_centers,
        layout_mode=a.layout_mode,
        layout=_layout_cfg(a),
        skip_layout=a.skip_layout,
    )
    manifest, _ = pl.run_pipeline(cfg)
    _report(manifest.counts)


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "sessionize": cmd_sessionize,
    "graph": cmd_graph,
    "communities": cmd_communities,
    "flow": cmd_flow,
    "layout": cmd_layout,
    "pipeline": cmd_pipeline,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        apply_config_defaults(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except BasketflowError as exc:
        print(f"basketflow: error: {exc}", file=sys.stderr)
        return exc.exit_code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        COMMANDS[args.command](args)
    except BasketflowError as exc:
        print(f"basketflow {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"basketflow {args.command}: error: {exc}", file=sys.stderr)
        return InputError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
