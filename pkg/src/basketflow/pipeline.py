"""Phase functions shared by the CLI subcommands and the end-to-end pipeline.

Every phase turns in-memory inputs into ``{filename: text}`` so that the
``pipeline`` command and a chain of single-phase commands write the same bytes.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from basketflow import __version__
from basketflow.cograph import (
    CoGraph,
    build_cooccurrence,
    edges_to_csv,
    graph_from_json,
    graph_stats,
    graph_to_json,
    prune,
    to_dot,
)
from basketflow.communities import (
    DetectConfig,
    communities_to_json,
    detect_communities,
    partition_from_json,
)
from basketflow.errors import BasketflowError, EmptyResultError, InputError, InvariantError, ValidationError
from basketflow.flowstats import (
    coverage_subgraph,
    flow_report,
    flow_to_json,
    ranking_csv,
    top_connections,
)
from basketflow.ingest import PostRecord, dedup_exact, read_posts
from basketflow.layout import LayoutConfig, layout_graph, layout_to_json
from basketflow.mapequation import Partition
from basketflow.sessionizer import AttractionSet, WindowConfig, sessionize, sets_from_json, sets_to_json

MANIFEST_SCHEMA = "basketflow.manifest/1"

SETS_FILE = "attraction_sets.json"
RAW_EDGES_FILE = "edges_raw.csv"
EDGES_FILE = "edges.csv"
GRAPH_FILE = "graph.json"
COMMUNITIES_FILE = "communities.json"
FLOW_FILE = "flow.json"
RANKING_FILE = "ranking.csv"
LAYOUT_FILE = "layout.json"
MANIFEST_FILE = "manifest.json"


def dumps(doc) -> str:
    return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"


def load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


@dataclass
class PipelineConfig:
    input_path: str = ""
    input_format: str = "csv"
    output_dir: str = "out"
    dedup: bool = True
    window_days: int = 7
    min_edge_weight: int = 6
    detect: DetectConfig = field(default_factory=DetectConfig)
    coverage_target_pct: float = 80.0
    layout_max_edges: int | None = None
    top_k: int = 5
    top_centers: int = 5
    layout_mode: str = "inverse"
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    skip_layout: bool = False

    @property
    def seed(self) -> int:
        return self.detect.seed

    def validate(self) -> None:
        WindowConfig(self.window_days)
        if self.min_edge_weight < 1:
            raise ValidationError("min_edge_weight", "must be >= 1")
        if not 0 < self.coverage_target_pct <= 100:
            raise ValidationError("coverage_target_pct", "must be in (0, 100]")
        if self.top_k < 1:
            raise ValidationError("top_k", "must be positive")
        if self.top_centers < 0:
            raise ValidationError("top_centers", "must be non-negative")
        if self.input_format not in ("csv", "jsonl"):
            raise ValidationError("input_format", "must be csv or jsonl")

    def snapshot(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RunManifest:
    config: dict
    counts: dict = field(default_factory=dict)
    timings_s: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    tool_version: str = __version__

    def to_json(self) -> dict:
        return {
            "schema": MANIFEST_SCHEMA,
            "tool_version": self.tool_version,
            "config": self.config,
            "counts": self.counts,
            "timings_s": self.timings_s,
            "artifacts": self.artifacts,
        }


# --- phases ----------------------------------------------------------------


def load_posts(path, format: str, dedup: bool = True) -> tuple[list[PostRecord], dict]:
    parsed = read_posts(path, format)
    records = dedup_exact(parsed.records) if dedup else parsed.records
    counts = {
        "posts_parsed": len(parsed.records),
        "posts_skipped": parsed.skipped_count,
        "posts_kept": len(records),
    }
    return records, counts


def phase_sessionize(records: list[PostRecord], window_days: int) -> tuple[list[AttractionSet], dict, dict]:
    sets, before = sessionize(records, WindowConfig(window_days))
    if not sets:
        raise EmptyResultError("no sessions formed: every attraction set was a singleton")
    counts = {"sets_formed": before, "sets_kept": len(sets)}
    return sets, counts, {SETS_FILE: dumps(sets_to_json(sets, window_days))}


def phase_graph(sets: list[AttractionSet], min_weight: int, dot: bool = False) -> tuple[CoGraph, dict, dict]:
    raw = build_cooccurrence(sets)
    pruned, stats = prune(raw, min_weight)
    if stats.removed_edge_count + pruned.edge_count != raw.edge_count:
        raise InvariantError("edge conservation violated after pruning")
    if pruned.edge_count == 0:
        raise EmptyResultError(f"no edges with weight >= {min_weight}")
    counts = {
        "nodes_built": raw.node_count,
        "edges_built": raw.edge_count,
        "edges_removed": stats.removed_edge_count,
        "edges_retained": pruned.edge_count,
        "nodes_retained": pruned.node_count,
        "components": stats.component_count,
    }
    files = {
        RAW_EDGES_FILE: edges_to_csv(raw),
        EDGES_FILE: edges_to_csv(pruned),
        GRAPH_FILE: dumps(
            graph_to_json(pruned, stats, min_weight=min_weight, unpruned=graph_stats(raw).to_json())
        ),
    }
    if dot:
        files["graph.dot"] = to_dot(pruned)
    return pruned, counts, files


def phase_communities(graph: CoGraph, cfg: DetectConfig) -> tuple[Partition, dict, dict]:
    result = detect_communities(graph, cfg)
    if abs(min(result.trial_L_values) - result.L_bits) > 1e-12:
        raise InvariantError("best trial does not carry the minimum codelength")
    counts = {"modules": result.partition.module_count, "L_bits": result.L_bits}
    return result.partition, counts, {COMMUNITIES_FILE: dumps(communities_to_json(graph, result, cfg))}


def phase_flow(
    graph: CoGraph,
    partition: Partition | None,
    coverage_pct: float,
    max_edges: int | None,
    top_k: int,
    centers: int,
) -> tuple[dict, dict]:
    report = flow_report(graph, partition)
    groups = [top_connections(graph, v, top_k) for v, _ in report.node_shares[:centers]]
    cover = coverage_subgraph(graph, coverage_pct, max_edges)
    doc = flow_to_json(graph, report, groups, cover, coverage_pct)
    counts = {"coverage_nodes": cover.node_count, "coverage_edges": cover.edge_count}
    return counts, {FLOW_FILE: dumps(doc), RANKING_FILE: ranking_csv(report)}


def phase_layout(
    graph: CoGraph,
    partition: Partition | None,
    coverage_pct: float,
    max_edges: int | None,
    mode: str,
    cfg: LayoutConfig,
    module: int | None = None,
) -> tuple[dict, dict]:
    shares = dict(flow_report(graph).node_shares)
    modules = None
    target = graph
    if partition is not None:
        modules = {v: partition.assignment[i] for i, v in enumerate(graph.nodes)}
        if module is not None:
            keep = [v for v, m in modules.items() if m == module]
            if not keep:
                raise ValidationError("module", f"no module {module}")
            target = graph.subgraph(keep)
    elif module is not None:
        raise ValidationError("module", "requires a communities file")
    # Coverage is measured against the whole network's flow ranking.
    chosen = coverage_subgraph(graph, coverage_pct)
    sub = target.subgraph([v for v in chosen.nodes if v in target.index])
    if max_edges is not None and sub.edge_count > max_edges:
        top = sorted(sub.edges.items(), key=lambda kv: (-kv[1], kv[0]))[:max_edges]
        sub = CoGraph(sub.nodes, dict(top))
    if sub.node_count == 0:
        raise EmptyResultError("nothing to lay out")
    result = layout_graph(sub, cfg, mode)
    meta = {
        "mode": mode,
        "coverage_target_pct": coverage_pct,
        "max_edges": max_edges,
        "module": module,
        "config": dataclasses.asdict(cfg),
    }
    doc = layout_to_json(sub, result, shares, modules, **meta)
    counts = {"layout_nodes": sub.node_count, "layout_edges": sub.edge_count, "layout_converged": result.converged}
    return counts, {LAYOUT_FILE: dumps(doc)}


def read_sets(path) -> list[AttractionSet]:
    return sets_from_json(load_json(path))


def read_graph(path) -> CoGraph:
    return graph_from_json(load_json(path))


def read_partition(graph: CoGraph, path) -> Partition:
    return partition_from_json(graph, load_json(path))


# --- output ------------------------------------------------------------------


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_outputs(outdir, files: dict[str, str]) -> list[Path]:
    """Write every file or none: anything written before a failure is removed."""
    outdir = Path(outdir)
    written: list[Path] = []
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            path = outdir / name
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            written.append(path)
    except OSError as exc:
        for path in written:
            try:
                os.remove(path)
            except OSError:
                pass
        raise InputError(f"cannot write outputs to {outdir}: {exc}") from exc
    return written


@contextmanager
def _phase(name: str, manifest: RunManifest):
    """Time a phase and tag any error with the phase name."""
    t = time.perf_counter()
    try:
        yield
    except BasketflowError as exc:
        exc.args = (f"phase {name}: {exc}",)
        raise
    manifest.timings_s[name] = round(time.perf_counter() - t, 6)


def run_pipeline(cfg: PipelineConfig, write: bool = True) -> tuple[RunManifest, dict[str, str]]:
    """Run all phases; files are written only after every phase succeeded."""
    cfg.validate()
    manifest = RunManifest(cfg.snapshot())
    files: dict[str, str] = {}
    counts = manifest.counts

    with _phase("ingest", manifest):
        records, c = load_posts(cfg.input_path, cfg.input_format, cfg.dedup)
        counts.update(c)
    with _phase("sessionize", manifest):
        sets, c, out = phase_sessionize(records, cfg.window_days)
        counts.update(c)
        files.update(out)
    with _phase("graph", manifest):
        graph, c, out = phase_graph(sets, cfg.min_edge_weight)
        counts.update(c)
        files.update(out)
    with _phase("communities", manifest):
        partition, c, out = phase_communities(graph, cfg.detect)
        counts.update(c)
        files.update(out)
    with _phase("flow", manifest):
        c, out = phase_flow(
            graph, partition, cfg.coverage_target_pct, cfg.layout_max_edges, cfg.top_k, cfg.top_centers
        )
        counts.update(c)
        files.update(out)
    if not cfg.skip_layout:
        with _phase("layout", manifest):
            c, out = phase_layout(
                graph, partition, cfg.coverage_target_pct, cfg.layout_max_edges, cfg.layout_mode, cfg.layout
            )
            counts.update(c)
            files.update(out)

    manifest.artifacts = {name: sha256_text(text) for name, text in files.items()}
    if write:
        write_outputs(cfg.output_dir, {**files, MANIFEST_FILE: dumps(manifest.to_json())})
    return manifest, files
