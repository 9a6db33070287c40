"""Undirected weighted co-occurrence network of attractions."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable, Mapping

from basketflow.errors import InputError, SchemaError, ValidationError
from basketflow.sessionizer import AttractionSet

GRAPH_SCHEMA = "basketflow.graph/1"
EDGE_CSV_HEADER = ("source", "target", "weight")


class CoGraph:
    """Immutable weighted graph with a dense node index.

    Nodes are indexed in sorted id order. Edges are stored once per
    unordered pair as ``(i, j) -> weight`` with ``i < j``; self-loops are
    not allowed.
    """

    def __init__(self, nodes: Iterable[str], edges: Mapping[tuple[int, int], float]):
        self.nodes: tuple[str, ...] = tuple(nodes)
        self.index: dict[str, int] = {v: i for i, v in enumerate(self.nodes)}
        if len(self.index) != len(self.nodes):
            raise ValueError("duplicate node ids")
        if list(self.nodes) != sorted(self.nodes):
            raise ValueError("nodes must be sorted")
        n = len(self.nodes)
        clean = {}
        for (i, j), w in edges.items():
            if i == j:
                raise ValueError(f"self-loop on {self.nodes[i]!r}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge endpoint out of range: {(i, j)}")
            if not w > 0:
                raise ValueError(f"non-positive weight {w} on {(i, j)}")
            key = (i, j) if i < j else (j, i)
            if key in clean:
                raise ValueError(f"duplicate edge {key}")
            clean[key] = w
        self.edges: dict[tuple[int, int], float] = dict(sorted(clean.items()))

    @classmethod
    def from_weights(cls, weights: Mapping[tuple[str, str], float], nodes: Iterable[str] = ()) -> "CoGraph":
        """Build from ``{(a, b): weight}`` keyed by node ids, in either order."""
        ids = sorted(set(nodes).union(*weights) if weights else set(nodes))
        index = {v: i for i, v in enumerate(ids)}
        edges: dict[tuple[int, int], float] = {}
        for (a, b), w in weights.items():
            i, j = sorted((index[a], index[b]))
            if (i, j) in edges:
                raise ValueError(f"duplicate edge {(a, b)}")
            edges[(i, j)] = w
        return cls(ids, edges)

    def __eq__(self, other):
        return isinstance(other, CoGraph) and self.nodes == other.nodes and self.edges == other.edges

    def __repr__(self):
        return f"CoGraph(nodes={len(self.nodes)}, edges={len(self.edges)})"

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def total_weight(self) -> float:
        return sum(self.edges.values())

    @cached_property
    def adjacency(self) -> list[list[tuple[int, float]]]:
        adj: list[list[tuple[int, float]]] = [[] for _ in self.nodes]
        for (i, j), w in self.edges.items():
            adj[i].append((j, w))
            adj[j].append((i, w))
        return adj

    @cached_property
    def strengths(self) -> list[float]:
        s = [0] * len(self.nodes)
        for (i, j), w in self.edges.items():
            s[i] += w
            s[j] += w
        return s

    def weight(self, a: str, b: str) -> float:
        i, j = sorted((self.index[a], self.index[b]))
        return self.edges.get((i, j), 0)

    def weighted_edges(self) -> Iterable[tuple[str, str, float]]:
        for (i, j), w in self.edges.items():
            yield self.nodes[i], self.nodes[j], w

    def scaled(self, factor: float) -> "CoGraph":
        return CoGraph(self.nodes, {e: w * factor for e, w in self.edges.items()})

    def subgraph(self, node_ids: Iterable[str]) -> "CoGraph":
        """Induced subgraph; node ids are re-indexed densely."""
        keep = sorted(set(node_ids))
        missing = [v for v in keep if v not in self.index]
        if missing:
            raise KeyError(f"unknown nodes: {missing[:5]}")
        old = {self.index[v] for v in keep}
        return CoGraph.from_weights(
            {(self.nodes[i], self.nodes[j]): w for (i, j), w in self.edges.items() if i in old and j in old},
            nodes=keep,
        )


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    edge_count: int
    total_weight: float
    component_count: int
    removed_edge_count: int = 0
    removed_node_count: int = 0

    def to_json(self) -> dict:
        return dict(self.__dict__)


def build_cooccurrence(sets: Iterable[AttractionSet]) -> CoGraph:
    """Each set adds 1 to the weight of every pair of its distinct attractions."""
    counts: Counter = Counter()
    for s in sets:
        counts.update(combinations(sorted(set(s.attractions)), 2))
    return CoGraph.from_weights(counts)


def connected_components(graph: CoGraph) -> list[list[str]]:
    """Components as sorted id lists, ordered by their smallest node index."""
    seen = [False] * graph.node_count
    comps = []
    adj = graph.adjacency
    for root in range(graph.node_count):
        if seen[root]:
            continue
        seen[root] = True
        stack, comp = [root], []
        while stack:
            v = stack.pop()
            comp.append(v)
            for u, _ in adj[v]:
                if not seen[u]:
                    seen[u] = True
                    stack.append(u)
        comps.append([graph.nodes[v] for v in sorted(comp)])
    return comps


def graph_stats(graph: CoGraph, removed_edges: int = 0, removed_nodes: int = 0) -> GraphStats:
    return GraphStats(
        graph.node_count,
        graph.edge_count,
        graph.total_weight,
        len(connected_components(graph)),
        removed_edges,
        removed_nodes,
    )


def prune(graph: CoGraph, min_weight: float = 6) -> tuple[CoGraph, GraphStats]:
    """Keep edges with weight >= ``min_weight`` and drop nodes left without edges."""
    if min_weight < 1:
        raise ValidationError("min_weight", "must be >= 1")
    kept = {(graph.nodes[i], graph.nodes[j]): w for (i, j), w in graph.edges.items() if w >= min_weight}
    pruned = CoGraph.from_weights(kept)
    stats = graph_stats(pruned, graph.edge_count - pruned.edge_count, graph.node_count - pruned.node_count)
    return pruned, stats


# --- serialization -------------------------------------------------------


def _num(w):
    return int(w) if float(w).is_integer() else w


def edges_to_csv(graph: CoGraph) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EDGE_CSV_HEADER)
    for a, b, w in graph.weighted_edges():
        writer.writerow((a, b, _num(w)))
    return buf.getvalue()


def edges_from_csv(text: str) -> CoGraph:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != EDGE_CSV_HEADER:
        raise InputError(f"edge list must start with header {','.join(EDGE_CSV_HEADER)}")
    weights = {}
    for n, row in enumerate(rows[1:], start=2):
        try:
            a, b, w = row
            weights[(a, b)] = float(w) if "." in w or "e" in w.lower() else int(w)
        except ValueError as exc:
            raise InputError(f"line {n}: {exc}") from exc
    return CoGraph.from_weights(weights)


def to_dot(graph: CoGraph, name: str = "cooccurrence") -> str:
    lines = [f"graph {name} {{"]
    for v in graph.nodes:
        lines.append(f'  "{_dot_escape(v)}";')
    for a, b, w in graph.weighted_edges():
        lines.append(f'  "{_dot_escape(a)}" -- "{_dot_escape(b)}" [weight={_num(w)}, label="{_num(w)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def graph_to_json(graph: CoGraph, stats: GraphStats | None = None, **meta) -> dict:
    doc = {"schema": GRAPH_SCHEMA, **meta}
    if stats is not None:
        doc["stats"] = stats.to_json()
    doc["nodes"] = list(graph.nodes)
    doc["edges"] = [[i, j, _num(w)] for (i, j), w in graph.edges.items()]
    return doc


def graph_from_json(doc) -> CoGraph:
    found = doc.get("schema") if isinstance(doc, dict) else None
    if found != GRAPH_SCHEMA:
        raise SchemaError(f"expected schema {GRAPH_SCHEMA!r}, found {found!r}")
    try:
        return CoGraph(doc["nodes"], {(i, j): w for i, j, w in doc["edges"]})
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed graph file: {exc}") from exc
