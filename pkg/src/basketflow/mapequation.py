"""Two-level map equation for undirected weighted networks.

All quantities are flow fractions: a node's relative weight is its strength
over twice the total edge weight, and a module's exit weight is the weight of
its boundary edges over the same normalizer, so an inter-module edge of
weight ``w`` adds ``w / 2W`` to each of the two modules it joins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from basketflow.cograph import CoGraph
from basketflow.errors import InputError


def plogp(x: float) -> float:
    """``x * log2(x)`` with ``0 log 0 = 0``; tiny negatives from round-off count as 0."""
    return x * math.log2(x) if x > 0 else 0.0


@dataclass(frozen=True)
class Partition:
    """Module id per node index; ids are dense in ``0..module_count-1``."""

    assignment: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(int(a) for a in self.assignment))
        used = set(self.assignment)
        if used and used != set(range(len(used))):
            raise ValueError(f"module ids must be dense 0..{len(used) - 1}, got {sorted(used)}")

    @classmethod
    def from_labels(cls, labels: Sequence) -> "Partition":
        """Relabel arbitrary hashable labels densely in first-occurrence order."""
        ids: dict = {}
        return cls(tuple(ids.setdefault(lab, len(ids)) for lab in labels))

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(tuple(range(n)))

    @classmethod
    def one_module(cls, n: int) -> "Partition":
        return cls((0,) * n)

    @property
    def module_count(self) -> int:
        return len(set(self.assignment))

    def modules(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.module_count)]
        for v, m in enumerate(self.assignment):
            out[m].append(v)
        return out

    def __len__(self):
        return len(self.assignment)


@dataclass(frozen=True)
class MapEqTerms:
    w_alpha: tuple[float, ...]
    w_module: tuple[float, ...]
    w_exit_module: tuple[float, ...]
    w_exit_total: float
    L_bits: float

    def to_json(self) -> dict:
        return {
            "L_bits": self.L_bits,
            "w_exit_total": self.w_exit_total,
            "w_module": list(self.w_module),
            "w_exit_module": list(self.w_exit_module),
        }


def _check_graph(graph: CoGraph) -> None:
    if graph.edge_count == 0:
        raise InputError("no edges")
    for v, s in enumerate(graph.strengths):
        if s <= 0:
            raise InputError(f"isolated node {graph.nodes[v]!r} has no incident edges")


def _check_partition(graph: CoGraph, partition: Partition) -> None:
    if len(partition) != graph.node_count:
        v = graph.nodes[len(partition)] if len(partition) < graph.node_count else None
        detail = f"node {v!r} is unassigned" if v is not None else "partition has extra entries"
        raise InputError(f"invalid partition: {detail}")


def node_relative_weights(graph: CoGraph) -> list[float]:
    _check_graph(graph)
    two_w = 2 * graph.total_weight
    return [s / two_w for s in graph.strengths]


def exit_weights(graph: CoGraph, partition: Partition) -> tuple[list[float], float]:
    """Per-module exit weights and their total."""
    _check_graph(graph)
    _check_partition(graph, partition)
    two_w = 2 * graph.total_weight
    exits = [0.0] * partition.module_count
    a = partition.assignment
    for (i, j), w in graph.edges.items():
        if a[i] != a[j]:
            exits[a[i]] += w
            exits[a[j]] += w
    exits = [e / two_w for e in exits]
    return exits, sum(exits)


def codelength(w_alpha: Sequence[float], w_module: Sequence[float], w_exit: Sequence[float]) -> float:
    total_exit = sum(w_exit)
    return (
        plogp(total_exit)
        - 2 * sum(plogp(q) for q in w_exit)
        - sum(plogp(p) for p in w_alpha)
        + sum(plogp(q + p) for q, p in zip(w_exit, w_module))
    )


def map_equation(graph: CoGraph, partition: Partition) -> MapEqTerms:
    w_alpha = node_relative_weights(graph)
    exits, total_exit = exit_weights(graph, partition)
    w_module = [0.0] * partition.module_count
    for v, m in enumerate(partition.assignment):
        w_module[m] += w_alpha[v]
    L = codelength(w_alpha, w_module, exits)
    return MapEqTerms(tuple(w_alpha), tuple(w_module), tuple(exits), total_exit, L)
