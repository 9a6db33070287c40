"""Kamada-Kawai spring layout over graph-theoretic distances.

Energy is ``E = sum_{i<j} k_ij (|p_i - p_j| - l_ij)^2`` with ``l_ij = L0 d_ij``
and ``k_ij = K / d_ij^2``. The optimizer repeatedly takes the node with the
largest gradient and runs damped 2-D Newton steps on it alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from basketflow.cograph import CoGraph, connected_components
from basketflow.errors import InputError, ValidationError

LAYOUT_SCHEMA = "basketflow.layout/1"
MODES = ("inverse", "unit")
MAX_INNER_STEPS = 50
MAX_HALVINGS = 12


@dataclass(frozen=True)
class DistanceMatrix:
    matrix: np.ndarray
    mode: str = "inverse"
    nodes: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class LayoutConfig:
    display_length_L0: float = 1.0
    spring_constant_K: float = 1.0
    newton_tol: float = 1e-6
    max_outer_iters: int | None = None  # None -> 100 * n
    component_tiling_gap: float | None = None  # None -> 0.25 * L0

    def __post_init__(self):
        for name in ("display_length_L0", "spring_constant_K", "newton_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(name, "must be positive")
        if self.max_outer_iters is not None and self.max_outer_iters < 1:
            raise ValidationError("max_outer_iters", "must be positive")
        if self.component_tiling_gap is not None and not self.component_tiling_gap > 0:
            raise ValidationError("component_tiling_gap", "must be positive")

    @property
    def gap(self) -> float:
        return self.component_tiling_gap if self.component_tiling_gap is not None else 0.25 * self.display_length_L0


@dataclass
class LayoutResult:
    coordinates: np.ndarray  # (n, 2)
    final_energy: float
    iterations_used: int
    converged: bool
    nodes: tuple[str, ...] = ()
    initial_energy: float = 0.0
    energy_trace: list[float] = field(default_factory=list, repr=False)


def shortest_path_distances(graph: CoGraph, mode: str = "inverse") -> DistanceMatrix:
    """All-pairs shortest paths with edge length ``1/weight`` or 1."""
    if mode not in MODES:
        raise ValidationError("mode", f"expected one of {MODES}, got {mode!r}")
    n = graph.node_count
    if n == 0:
        return DistanceMatrix(np.zeros((0, 0)), mode, ())
    if len(connected_components(graph)) > 1:
        raise InputError("graph is disconnected; compute distances per connected component")
    rows, cols, lens = [], [], []
    for (i, j), w in graph.edges.items():
        length = 1.0 / w if mode == "inverse" else 1.0
        rows += [i, j]
        cols += [j, i]
        lens += [length, length]
    mat = csr_matrix((lens, (rows, cols)), shape=(n, n))
    return DistanceMatrix(dijkstra(mat, directed=True), mode, graph.nodes)


def _springs(dist: np.ndarray, cfg: LayoutConfig) -> tuple[np.ndarray, np.ndarray]:
    n = dist.shape[0]
    off = ~np.eye(n, dtype=bool)
    length = cfg.display_length_L0 * dist
    strength = np.zeros_like(dist)
    strength[off] = cfg.spring_constant_K / dist[off] ** 2
    return length, strength


def layout_energy(coords: np.ndarray, dist: DistanceMatrix | np.ndarray, cfg: LayoutConfig = LayoutConfig()):
    """Energy and its gradient ``dE/dp_i`` as an ``(n, 2)`` array."""
    d = dist.matrix if isinstance(dist, DistanceMatrix) else np.asarray(dist, dtype=float)
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (d.shape[0], 2):
        raise ValueError(f"coordinates shape {coords.shape} does not match {d.shape[0]} nodes")
    length, strength = _springs(d, cfg)
    diff = coords[:, None, :] - coords[None, :, :]
    norm = np.sqrt((diff**2).sum(axis=2))
    energy = 0.5 * float((strength * (norm - length) ** 2).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(norm > 0, 2 * strength * (1 - length / norm), 0.0)
    grad = (factor[:, :, None] * diff).sum(axis=1)
    return energy, grad


def _circle(n: int, radius: float) -> np.ndarray:
    if n == 1:
        return np.zeros((1, 2))
    angle = 2 * np.pi * np.arange(n) / n
    return radius * np.column_stack((np.cos(angle), np.sin(angle)))


class _Optimizer:
    """Node-wise Newton descent with an incrementally maintained gradient."""

    def __init__(self, d: np.ndarray, cfg: LayoutConfig):
        self.length, self.strength = _springs(d, cfg)
        self.k2 = 2 * self.strength
        self.k2l = self.k2 * self.length
        self.k2sum = self.k2.sum(axis=1)
        self.length2 = 2 * self.length
        self.n = d.shape[0]
        pos = _circle(self.n, 0.5 * cfg.display_length_L0 * float(d.max()))
        self.x = pos[:, 0].copy()
        self.y = pos[:, 1].copy()
        self.energy, grad = layout_energy(pos, d, cfg)
        self.gx = grad[:, 0].copy()
        self.gy = grad[:, 1].copy()

    def offsets(self, m: int, px: float, py: float):
        """Offsets and distances from every node to (px, py); node m's own entry is neutralized."""
        dx = px - self.x
        dy = py - self.y
        dx[m] = dy[m] = 0.0
        norm = np.hypot(dx, dy)
        norm[m] = 1.0
        return dx, dy, norm

    def node_terms(self, m: int, dx, dy, norm):
        """Gradient, Hessian and per-spring force factor of node m for the given offsets."""
        a = self.k2l[m] / norm
        f = self.k2[m] - a
        c = a / (norm * norm)
        cx = c * dx
        sxx, sxy = float(cx @ dx), float(cx @ dy)
        # sum(c * dy^2) = sum(c * norm^2) - sum(c * dx^2) = sum(a) - sxx
        k2sum = float(self.k2sum[m])
        hessian = (k2sum - float(a.sum()) + sxx, sxy, k2sum - sxx)
        return float(f @ dx), float(f @ dy), hessian, f

    def step_delta(self, m: int, dx, dy, norm, sx: float, sy: float):
        """Change in E from shifting node m by (sx, sy), without cancellation.

        Uses |a| - |b| = (|a|^2 - |b|^2) / (|a| + |b|) so tiny decreases are
        still resolved when E itself is large.
        """
        nx = dx + sx
        ny = dy + sy
        new = np.hypot(nx, ny)
        new[m] = 1.0
        total = new + norm
        num = dx * (2 * sx)
        num += dy * (2 * sy)
        num += sx * sx + sy * sy
        num /= total
        total -= self.length2[m]
        delta = float(self.strength[m] @ (num * total))
        return delta, nx, ny, new

    def relax(self, m: int, tol: float, trace: list[float]) -> bool:
        """Damped Newton steps on node m until its gradient is below ``tol``.

        Returns False when not even the first step decreased the energy.
        """
        px, py = float(self.x[m]), float(self.y[m])
        dx0, dy0, norm = self.offsets(m, px, py)
        gx, gy, (hxx, hxy, hyy), f0 = self.node_terms(m, dx0, dy0, norm)
        dx, dy, f = dx0, dy0, f0
        moved = False
        for _ in range(MAX_INNER_STEPS):
            # Shift the Hessian to positive definite before solving.
            half_tr, det_part = (hxx + hyy) / 2, math.hypot((hxx - hyy) / 2, hxy)
            lo = half_tr - det_part
            if lo <= 1e-12 * max(1.0, abs(hxx), abs(hyy)):
                shift = abs(lo) + 1e-3 * max(1.0, abs(half_tr))
                hxx, hyy = hxx + shift, hyy + shift
            det = hxx * hyy - hxy * hxy
            sx = -(hyy * gx - hxy * gy) / det
            sy = -(hxx * gy - hxy * gx) / det
            for _ in range(MAX_HALVINGS):
                delta, nx, ny, new = self.step_delta(m, dx, dy, norm, sx, sy)
                if delta < 0:
                    break
                sx, sy = sx / 2, sy / 2
            else:
                break
            px, py = px + sx, py + sy
            dx, dy, norm = nx, ny, new
            gx, gy, (hxx, hxy, hyy), f = self.node_terms(m, dx, dy, norm)
            self.energy += delta
            trace.append(self.energy)
            moved = True
            if math.hypot(gx, gy) < tol:
                break
        if moved:
            # Node j's gradient holds f_j * (x_j - x_m); swap the old term for the new one.
            self.gx += f0 * dx0 - f * dx
            self.gy += f0 * dy0 - f * dy
            self.x[m], self.y[m] = px, py
            self.gx[m], self.gy[m] = gx, gy
        return moved


def kamada_kawai(dist: DistanceMatrix, cfg: LayoutConfig = LayoutConfig()) -> LayoutResult:
    d = np.asarray(dist.matrix, dtype=float)
    n = d.shape[0] if d.ndim == 2 else 0
    if n == 0:
        raise InputError("cannot lay out an empty graph")
    if d.shape != (n, n) or not np.all(np.isfinite(d)):
        raise InputError("distance matrix must be square and finite")
    nodes = tuple(dist.nodes) or tuple(str(i) for i in range(n))
    if n == 1:
        return LayoutResult(np.zeros((1, 2)), 0.0, 0, True, nodes, 0.0, [0.0])
    if np.any(d[~np.eye(n, dtype=bool)] <= 0):
        raise InputError("distinct nodes must have positive distance")

    opt = _Optimizer(d, cfg)
    initial = opt.energy
    trace = [initial]
    max_iters = cfg.max_outer_iters or 100 * n
    converged = False
    iters = 0
    stalled: set[int] = set()
    while iters < max_iters:
        norms = np.hypot(opt.gx, opt.gy)
        if stalled:
            norms[list(stalled)] = 0.0
        m = int(np.argmax(norms))
        if norms[m] < cfg.newton_tol:
            converged = not stalled
            break
        iters += 1
        if opt.relax(m, cfg.newton_tol, trace):
            stalled.clear()
        else:
            # Round-off floor: m cannot lower E until some other node moves.
            stalled.add(m)
    # Re-evaluate from scratch so the reported energy carries no drift.
    coords = np.column_stack((opt.x, opt.y))
    coords -= coords.mean(axis=0)
    energy = layout_energy(coords, d, cfg)[0]
    return LayoutResult(coords, energy, iters, converged, nodes, initial, trace)


def tile_components(
    layouts: list[LayoutResult], cfg: LayoutConfig = LayoutConfig(), flows: list[float] | None = None
) -> LayoutResult:
    """Place component layouts on a grid, left to right and top to bottom by descending flow.

    Cells in a grid row are separated by ``cfg.gap``; rows likewise.
    """
    if not layouts:
        raise ValidationError("layouts", "need at least one layout")
    order = list(range(len(layouts)))
    if flows is not None:
        order.sort(key=lambda i: -flows[i])
    cols = math.ceil(math.sqrt(len(layouts)))
    gap = cfg.gap
    placed = []
    x = y = 0.0
    row_height = 0.0
    for slot, i in enumerate(order):
        if slot and slot % cols == 0:
            x = 0.0
            y -= row_height + gap
            row_height = 0.0
        c = layouts[i].coordinates
        lo, hi = c.min(axis=0), c.max(axis=0)
        # Top-left corner of the box sits at (x, y).
        placed.append(c + np.array([x - lo[0], y - hi[1]]))
        x += hi[0] - lo[0] + gap
        row_height = max(row_height, hi[1] - lo[1])
    coords = np.vstack(placed)
    nodes = tuple(v for i in order for v in layouts[i].nodes)
    return LayoutResult(
        coords,
        sum(l.final_energy for l in layouts),
        sum(l.iterations_used for l in layouts),
        all(l.converged for l in layouts),
        nodes,
        sum(l.initial_energy for l in layouts),
    )


def layout_graph(graph: CoGraph, cfg: LayoutConfig = LayoutConfig(), mode: str = "inverse") -> LayoutResult:
    """Lay out each connected component, then tile them by component flow."""
    strength = dict(zip(graph.nodes, graph.strengths))
    parts, flows = [], []
    for comp in connected_components(graph):
        sub = graph.subgraph(comp)
        parts.append(kamada_kawai(shortest_path_distances(sub, mode), cfg))
        flows.append(sum(strength[v] for v in comp))
    if len(parts) == 1:
        return parts[0]
    return tile_components(parts, cfg, flows)


def _r(x: float) -> float:
    return round(float(x), 9)


def layout_to_json(
    graph: CoGraph,
    result: LayoutResult,
    shares: dict[str, float] | None = None,
    modules: dict[str, int] | None = None,
    **meta,
) -> dict:
    nodes = []
    for v, (x, y) in zip(result.nodes, result.coordinates):
        row = {"id": v, "x": _r(x), "y": _r(y)}
        if shares is not None:
            row["share_pct"] = shares.get(v)
        if modules is not None:
            row["module"] = modules.get(v)
        nodes.append(row)
    return {
        "schema": LAYOUT_SCHEMA,
        **meta,
        "final_energy": result.final_energy,
        "initial_energy": result.initial_energy,
        "iterations_used": result.iterations_used,
        "converged": result.converged,
        "nodes": nodes,
        "edges": [{"source": a, "target": b, "weight": w} for a, b, w in graph.weighted_edges()],
    }
