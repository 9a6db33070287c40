"""Hard-partition community detection by greedy map-equation minimization."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from basketflow.cograph import CoGraph
from basketflow.errors import InputError, SchemaError, ValidationError
from basketflow.mapequation import Partition, map_equation, node_relative_weights, plogp

COMMUNITIES_SCHEMA = "basketflow.communities/1"
EXHAUSTIVE_MAX_NODES = 10
# Smallest ΔL that counts as an improvement for a single move; below this a
# node stays put, which keeps sweeps from cycling on round-off.
MOVE_EPS = 1e-14


@dataclass(frozen=True)
class DetectConfig:
    seed: int = 0
    trials: int = 10
    max_sweeps: int = 100
    min_improvement: float = 1e-10

    def __post_init__(self):
        if self.seed < 0:
            raise ValidationError("seed", "must be non-negative")
        for name in ("trials", "max_sweeps"):
            if getattr(self, name) < 1:
                raise ValidationError(name, "must be positive")
        if not self.min_improvement > 0:
            raise ValidationError("min_improvement", "must be positive")


@dataclass
class CommunityResult:
    partition: Partition
    L_bits: float
    trial_L_values: list[float] = field(default_factory=list)
    sweeps_used: int = 0


class _FlowNetwork:
    """Normalized network seen by the optimizer at one aggregation level.

    ``flow[v]`` is the node's relative weight, ``out[v]`` the flow on its
    edges to other nodes (self-weight from aggregation excluded) and
    ``adj[v]`` its ``(neighbor, flow)`` list without self-edges.
    """

    def __init__(self, flow: list[float], out: list[float], adj: list[list[tuple[int, float]]], entropy: float):
        self.flow = flow
        self.out = out
        self.adj = adj
        self.node_entropy = entropy  # Σ plogp(w_α) over leaf nodes, constant across levels

    @classmethod
    def from_graph(cls, graph: CoGraph) -> "_FlowNetwork":
        w_alpha = node_relative_weights(graph)
        two_w = 2 * graph.total_weight
        adj = [[(u, w / two_w) for u, w in nbrs] for nbrs in graph.adjacency]
        out = [sum(w for _, w in nbrs) for nbrs in adj]
        return cls(w_alpha, out, adj, sum(plogp(p) for p in w_alpha))

    def aggregate(self, assignment: Sequence[int], m: int) -> "_FlowNetwork":
        flow = [0.0] * m
        links: list[dict[int, float]] = [{} for _ in range(m)]
        for v, mv in enumerate(assignment):
            flow[mv] += self.flow[v]
            row = links[mv]
            for u, w in self.adj[v]:
                mu = assignment[u]
                if mu != mv:
                    row[mu] = row.get(mu, 0.0) + w
        adj = [sorted(row.items()) for row in links]
        out = [sum(w for _, w in nbrs) for nbrs in adj]
        return _FlowNetwork(flow, out, adj, self.node_entropy)


class MapEquationState:
    """Module aggregates for O(degree) move evaluation.

    ``exit[m]`` and ``vol[m]`` hold each module's exit flow and total node
    flow. Target module ``module_count`` (one past the last) means "a new,
    empty module".
    """

    def __init__(self, net: _FlowNetwork, assignment: Sequence[int]):
        self.net = net
        self.module = list(assignment)
        m = max(self.module) + 1 if self.module else 0
        self.vol = [0.0] * m
        self.exit = [0.0] * m
        self.size = [0] * m
        for v, mv in enumerate(self.module):
            self.vol[mv] += net.flow[v]
            self.size[mv] += 1
            for u, w in net.adj[v]:
                if self.module[u] != mv:
                    self.exit[mv] += w
        self._refresh_sums()

    @classmethod
    def for_partition(cls, graph: CoGraph, partition: Partition) -> "MapEquationState":
        if len(partition) != graph.node_count:
            raise InputError("partition does not match graph")
        return cls(_FlowNetwork.from_graph(graph), partition.assignment)

    def _refresh_sums(self) -> None:
        self.total_exit = sum(self.exit)
        self.sum_exit_log = sum(plogp(q) for q in self.exit)
        self.sum_mod_log = sum(plogp(q + p) for q, p in zip(self.exit, self.vol))

    @property
    def module_count(self) -> int:
        return sum(1 for s in self.size if s)

    @property
    def codelength(self) -> float:
        return plogp(self.total_exit) - 2 * self.sum_exit_log - self.net.node_entropy + self.sum_mod_log

    def neighbor_module_flow(self, v: int) -> dict[int, float]:
        flows: dict[int, float] = {}
        module = self.module
        for u, w in self.net.adj[v]:
            mu = module[u]
            flows[mu] = flows.get(mu, 0.0) + w
        return flows

    def _new_terms(self, v: int, old: int, new: int, k_old: float, k_new: float):
        out_v, p_v = self.net.out[v], self.net.flow[v]
        if self.size[old] == 1:
            exit_old, vol_old = 0.0, 0.0
        else:
            exit_old = self.exit[old] - out_v + 2 * k_old
            vol_old = self.vol[old] - p_v
        exit_new_prev = self.exit[new] if new < len(self.exit) else 0.0
        vol_new_prev = self.vol[new] if new < len(self.vol) else 0.0
        exit_new = exit_new_prev + out_v - 2 * k_new
        vol_new = vol_new_prev + p_v
        return exit_old, vol_old, exit_new_prev, vol_new_prev, exit_new, vol_new

    def delta(self, v: int, new: int, k_old: float, k_new: float) -> float:
        old = self.module[v]
        if new == old:
            return 0.0
        exit_old, vol_old, exit_new_prev, vol_new_prev, exit_new, vol_new = self._new_terms(v, old, new, k_old, k_new)
        d_exit = exit_old - self.exit[old] + exit_new - exit_new_prev
        total_exit = self.total_exit + d_exit
        d_exit_log = plogp(exit_old) + plogp(exit_new) - plogp(self.exit[old]) - plogp(exit_new_prev)
        d_mod_log = (
            plogp(exit_old + vol_old)
            + plogp(exit_new + vol_new)
            - plogp(self.exit[old] + self.vol[old])
            - plogp(exit_new_prev + vol_new_prev)
        )
        return plogp(total_exit) - plogp(self.total_exit) - 2 * d_exit_log + d_mod_log

    def move_gain(self, v: int, target: int) -> float:
        """L after moving ``v`` to ``target`` minus L before."""
        if not 0 <= target <= len(self.exit):
            raise IndexError(f"module {target} out of range")
        flows = self.neighbor_module_flow(v)
        return self.delta(v, target, flows.get(self.module[v], 0.0), flows.get(target, 0.0))

    def move(self, v: int, target: int, k_old: float | None = None, k_new: float | None = None) -> None:
        old = self.module[v]
        if target == old:
            return
        if k_old is None or k_new is None:
            flows = self.neighbor_module_flow(v)
            k_old, k_new = flows.get(old, 0.0), flows.get(target, 0.0)
        if target == len(self.exit):
            self.exit.append(0.0)
            self.vol.append(0.0)
            self.size.append(0)
        exit_old, vol_old, _, _, exit_new, vol_new = self._new_terms(v, old, target, k_old, k_new)
        for mod, q, p in ((old, exit_old, vol_old), (target, exit_new, vol_new)):
            self.total_exit += q - self.exit[mod]
            self.sum_exit_log += plogp(q) - plogp(self.exit[mod])
            self.sum_mod_log += plogp(q + p) - plogp(self.exit[mod] + self.vol[mod])
            self.exit[mod], self.vol[mod] = q, p
        self.size[old] -= 1
        self.size[target] += 1
        self.module[v] = target

    def dense_assignment(self) -> tuple[list[int], int]:
        ids: dict[int, int] = {}
        dense = [ids.setdefault(m, len(ids)) for m in self.module]
        return dense, len(ids)


def move_gain(graph: CoGraph, partition: Partition, node: int, target_module: int) -> float:
    """ΔL in bits for moving ``node`` (an index) into ``target_module``.

    Builds the module aggregates once (O(edges)); repeated queries should use
    :class:`MapEquationState` directly, where each costs O(degree).
    """
    return MapEquationState.for_partition(graph, partition).move_gain(node, target_module)


def _sweep_level(state: MapEquationState, rng: random.Random, cfg: DetectConfig) -> tuple[int, bool]:
    """Local moving until a sweep gains less than ``min_improvement``.

    Returns the number of sweeps and whether any node moved.
    """
    n = len(state.module)
    order = list(range(n))
    moved_any = False
    sweeps = 0
    for _ in range(cfg.max_sweeps):
        sweeps += 1
        rng.shuffle(order)
        before = state.codelength
        for v in order:
            flows = state.neighbor_module_flow(v)
            old = state.module[v]
            k_old = flows.get(old, 0.0)
            best, best_delta = old, -MOVE_EPS
            for target in sorted(flows):
                if target == old:
                    continue
                d = state.delta(v, target, k_old, flows[target])
                if d < best_delta:
                    best, best_delta = target, d
            if best != old:
                state.move(v, best, k_old, flows[best])
                moved_any = True
        if before - state.codelength < cfg.min_improvement:
            break
    return sweeps, moved_any


def _run_trial(net: _FlowNetwork, n: int, rng: random.Random, cfg: DetectConfig) -> tuple[list[int], int]:
    leaf_module = list(range(n))
    level = net
    sweeps = 0
    while True:
        state = MapEquationState(level, range(len(level.flow)))
        used, moved = _sweep_level(state, rng, cfg)
        sweeps += used
        if not moved:
            break
        dense, m = state.dense_assignment()
        leaf_module = [dense[mv] for mv in leaf_module]
        if m == 1:
            break
        level = level.aggregate(dense, m)
    return leaf_module, sweeps


def renumber_by_flow(partition: Partition, w_alpha: Sequence[float]) -> Partition:
    """Module 0 carries the most flow; ties go to the module holding the lowest node index."""
    flow: dict[int, float] = {}
    first: dict[int, int] = {}
    for v, m in enumerate(partition.assignment):
        flow[m] = flow.get(m, 0.0) + w_alpha[v]
        first.setdefault(m, v)
    order = sorted(flow, key=lambda m: (-flow[m], first[m]))
    new_id = {m: i for i, m in enumerate(order)}
    return Partition(tuple(new_id[m] for m in partition.assignment))


def detect_communities(graph: CoGraph, cfg: DetectConfig = DetectConfig()) -> CommunityResult:
    """Best of ``cfg.trials`` greedy runs; trial ``t`` shuffles with seed ``cfg.seed + t``."""
    net = _FlowNetwork.from_graph(graph)
    w_alpha = net.flow
    best = None
    trial_L = []
    for t in range(cfg.trials):
        assignment, sweeps = _run_trial(net, graph.node_count, random.Random(cfg.seed + t), cfg)
        partition = renumber_by_flow(Partition.from_labels(assignment), w_alpha)
        L = map_equation(graph, partition).L_bits
        trial_L.append(L)
        if best is None or L < best[1]:
            best = (partition, L, sweeps)
    partition, L, sweeps = best
    return CommunityResult(partition, L, trial_L, sweeps)


# --- exhaustive oracle ---------------------------------------------------


def restricted_growth_strings(n: int) -> Iterator[tuple[int, ...]]:
    """All set partitions of ``n`` items as restricted growth strings, in lexicographic order."""
    if n == 0:
        yield ()
        return
    a = [0] * n
    top = [0] * n  # top[i] = max(a[0..i])

    def rec(i: int):
        if i == n:
            yield tuple(a)
            return
        for v in range(top[i - 1] + 2):
            a[i] = v
            top[i] = max(top[i - 1], v)
            yield from rec(i + 1)

    yield from rec(1)


def bell_number(n: int) -> int:
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


def exhaustive_min_partition(graph: CoGraph, tol: float = 1e-12) -> CommunityResult:
    """Global minimum of L over every set partition (at most 10 nodes).

    Ties within ``tol`` go to fewer modules, then the lexicographically
    smallest restricted growth string.
    """
    n = graph.node_count
    if n > EXHAUSTIVE_MAX_NODES:
        raise ValidationError("graph", f"exhaustive search refused for {n} > {EXHAUSTIVE_MAX_NODES} nodes")
    w_alpha = node_relative_weights(graph)
    two_w = 2 * graph.total_weight
    edges = [(i, j, w / two_w) for (i, j), w in graph.edges.items()]
    node_term = sum(plogp(p) for p in w_alpha)
    best = None
    for rgs in restricted_growth_strings(n):
        m = max(rgs) + 1
        vol = [0.0] * m
        ex = [0.0] * m
        for v, mv in enumerate(rgs):
            vol[mv] += w_alpha[v]
        for i, j, w in edges:
            if rgs[i] != rgs[j]:
                ex[rgs[i]] += w
                ex[rgs[j]] += w
        total = sum(ex)
        L = plogp(total) - 2 * sum(map(plogp, ex)) - node_term + sum(plogp(q + p) for q, p in zip(ex, vol))
        if best is None or L < best[0] - tol or (abs(L - best[0]) <= tol and m < best[1]):
            best = (L, m, rgs)
    partition = renumber_by_flow(Partition(best[2]), w_alpha)
    L = map_equation(graph, partition).L_bits
    return CommunityResult(partition, L, [L], 0)


# --- report --------------------------------------------------------------


def communities_to_json(graph: CoGraph, result: CommunityResult, cfg: DetectConfig | None = None) -> dict:
    terms = map_equation(graph, result.partition)
    modules = []
    for m, members in enumerate(result.partition.modules()):
        modules.append(
            {
                "module": m,
                "nodes": [graph.nodes[v] for v in members],
                "w_i": terms.w_module[m],
                "w_exit": terms.w_exit_module[m],
            }
        )
    doc = {"schema": COMMUNITIES_SCHEMA}
    if cfg is not None:
        doc["config"] = dict(cfg.__dict__)
    doc.update(
        {
            "L_bits": result.L_bits,
            "trial_L_values": result.trial_L_values,
            "sweeps_used": result.sweeps_used,
            "module_count": result.partition.module_count,
            "w_exit_total": terms.w_exit_total,
            "modules": modules,
            "assignment": {graph.nodes[v]: m for v, m in enumerate(result.partition.assignment)},
        }
    )
    return doc


def partition_from_json(graph: CoGraph, doc) -> Partition:
    found = doc.get("schema") if isinstance(doc, dict) else None
    if found != COMMUNITIES_SCHEMA:
        raise SchemaError(f"expected schema {COMMUNITIES_SCHEMA!r}, found {found!r}")
    assignment = doc.get("assignment", {})
    missing = [v for v in graph.nodes if v not in assignment]
    if missing:
        raise SchemaError(f"community file does not cover node {missing[0]!r}")
    try:
        return Partition(tuple(assignment[v] for v in graph.nodes))
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
