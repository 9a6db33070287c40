"""Flow shares, community flow summaries, top connections and coverage subgraphs.

A node's flow share is its relative weight ``w_α`` as a percentage. Edge and
inter-module flows are percentages of the total edge weight.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from itertools import accumulate

from basketflow.cograph import CoGraph
from basketflow.errors import InputError, ValidationError
from basketflow.mapequation import Partition, node_relative_weights

FLOW_SCHEMA = "basketflow.flow/1"
RANKING_CSV_HEADER = ("rank", "attraction", "share_pct")


@dataclass
class FlowReport:
    node_shares: list[tuple[str, float]]
    cumulative: list[float]
    community_internal: list[float] = field(default_factory=list)
    intermodule_flows: dict[tuple[int, int], float] = field(default_factory=dict)


@dataclass(frozen=True)
class ConnectionGroup:
    center: str
    neighbors: tuple[tuple[str, float], ...]

    def to_json(self) -> dict:
        return {"center": self.center, "neighbors": [{"attraction": a, "share_pct": s} for a, s in self.neighbors]}


def node_flow_shares(graph: CoGraph) -> FlowReport:
    """Nodes ranked by flow share, descending, ties by node id."""
    shares = [100.0 * p for p in node_relative_weights(graph)]
    ranked = sorted(zip(graph.nodes, shares), key=lambda t: (-t[1], t[0]))
    return FlowReport(ranked, list(accumulate(s for _, s in ranked)))


def community_flow_summary(graph: CoGraph, partition: Partition) -> tuple[list[float], dict[tuple[int, int], float]]:
    """Per-module internal share (100·w_i) and flow between each pair of modules."""
    if len(partition) != graph.node_count:
        raise InputError("partition does not match graph")
    internal = [0.0] * partition.module_count
    for v, p in enumerate(node_relative_weights(graph)):
        internal[partition.assignment[v]] += 100.0 * p
    between: dict[tuple[int, int], float] = {}
    a = partition.assignment
    for (i, j), w in graph.edges.items():
        if a[i] != a[j]:
            key = (min(a[i], a[j]), max(a[i], a[j]))
            between[key] = between.get(key, 0.0) + w
    total = graph.total_weight
    return internal, {k: 100.0 * w / total for k, w in sorted(between.items())}


def flow_report(graph: CoGraph, partition: Partition | None = None) -> FlowReport:
    report = node_flow_shares(graph)
    if partition is not None:
        report.community_internal, report.intermodule_flows = community_flow_summary(graph, partition)
    return report


def top_connections(graph: CoGraph, center: str, k: int = 5) -> ConnectionGroup:
    if center not in graph.index:
        raise KeyError(f"unknown attraction {center!r}")
    if k < 1:
        raise ValidationError("k", "must be positive")
    total = graph.total_weight
    nbrs = [(graph.nodes[u], w) for u, w in graph.adjacency[graph.index[center]]]
    nbrs.sort(key=lambda t: (-t[1], t[0]))
    return ConnectionGroup(center, tuple((v, 100.0 * w / total) for v, w in nbrs[:k]))


def coverage_nodes(graph: CoGraph, target_share: float) -> list[str]:
    """Shortest prefix of the flow ranking whose cumulative share reaches ``target_share``."""
    if not 0 < target_share <= 100:
        raise ValidationError("target_share", f"must be in (0, 100], got {target_share}")
    report = node_flow_shares(graph)
    # If round-off leaves the final cumulative a hair under 100, the loop
    # falls through with every node selected.
    for count, cum in enumerate(report.cumulative, start=1):
        if cum >= target_share:
            break
    return [v for v, _ in report.node_shares[:count]]


def coverage_subgraph(graph: CoGraph, target_share: float = 80.0, max_edges: int | None = None) -> CoGraph:
    keep = coverage_nodes(graph, target_share)
    sub = graph.subgraph(keep)
    if max_edges is None or sub.edge_count <= max_edges:
        return sub
    if max_edges < 0:
        raise ValidationError("max_edges", "must be non-negative")
    top = sorted(sub.edges.items(), key=lambda kv: (-kv[1], kv[0]))[:max_edges]
    return CoGraph(sub.nodes, dict(top))


def ranking_csv(report: FlowReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RANKING_CSV_HEADER)
    for rank, (v, s) in enumerate(report.node_shares, start=1):
        writer.writerow((rank, v, f"{s:.2f}"))
    return buf.getvalue()


def format_table(report: FlowReport, limit: int = 20) -> str:
    width = max([len("attraction")] + [len(v) for v, _ in report.node_shares[:limit]])
    lines = [f"{'#':>4}  {'attraction':<{width}}  {'% flow':>7}  {'cum %':>7}"]
    for rank, ((v, s), c) in enumerate(zip(report.node_shares[:limit], report.cumulative), start=1):
        lines.append(f"{rank:>4}  {v:<{width}}  {s:>7.2f}  {c:>7.2f}")
    return "\n".join(lines)


def flow_to_json(
    graph: CoGraph,
    report: FlowReport,
    connections: list[ConnectionGroup] = (),
    coverage: CoGraph | None = None,
    coverage_target: float | None = None,
) -> dict:
    doc = {
        "schema": FLOW_SCHEMA,
        "node_shares": [{"attraction": v, "share_pct": s} for v, s in report.node_shares],
        "cumulative": report.cumulative,
        "community_internal": report.community_internal,
        "intermodule_flows": [{"modules": list(k), "share_pct": s} for k, s in report.intermodule_flows.items()],
        "top_connections": [c.to_json() for c in connections],
    }
    if coverage is not None:
        doc["coverage"] = {
            "target_pct": coverage_target,
            "node_count": coverage.node_count,
            "edge_count": coverage.edge_count,
            "nodes": list(coverage.nodes),
        }
    return doc
