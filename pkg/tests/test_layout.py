import math
import random

import numpy as np
import pytest

from basketflow.cograph import CoGraph
from basketflow.errors import InputError, ValidationError
from basketflow.layout import (
    DistanceMatrix,
    LayoutConfig,
    kamada_kawai,
    layout_energy,
    layout_graph,
    shortest_path_distances,
    tile_components,
)
from oracles import random_graph, single_source

TRIANGLE = CoGraph.from_weights({("A", "B"): 1, ("B", "C"): 1, ("A", "C"): 1})
PATH = CoGraph.from_weights({("A", "B"): 1, ("B", "C"): 1})


def pairwise(coords):
    diff = coords[:, None, :] - coords[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def test_single_node():
    res = layout_graph(CoGraph(["A"], {}))
    assert res.coordinates.tolist() == [[0.0, 0.0]] and res.final_energy == 0.0 and res.converged


def test_two_nodes_at_display_length():
    res = layout_graph(CoGraph.from_weights({("A", "B"): 1}), LayoutConfig(display_length_L0=2.5), mode="unit")
    assert pairwise(res.coordinates)[0, 1] == pytest.approx(2.5, abs=1e-6)
    assert res.final_energy == pytest.approx(0.0, abs=1e-10)


def test_equilateral_triangle():
    res = layout_graph(TRIANGLE, mode="unit")
    d = pairwise(res.coordinates)
    for i, j in [(0, 1), (1, 2), (0, 2)]:
        assert d[i, j] == pytest.approx(1.0, abs=1e-6)
    assert res.converged
    assert np.allclose(res.coordinates.mean(axis=0), 0.0, atol=1e-12)


def test_energy_trace_non_increasing():
    g = random_graph(random.Random(1), 30, p=0.1)
    res = layout_graph(g)
    assert res.final_energy <= res.initial_energy
    assert all(b <= a + 1e-12 for a, b in zip(res.energy_trace, res.energy_trace[1:]))


def test_coincident_points_energy():
    d = np.array([[0, 1.0, 2.0], [1.0, 0, 1.0], [2.0, 1.0, 0]])
    E, _ = layout_energy(np.zeros((3, 2)), d)
    # Each pair contributes K/d^2 * (L0 d)^2 = 1.
    assert E == pytest.approx(3.0)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_difference(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(random.Random(seed), 8)
    dist = shortest_path_distances(g)
    cfg = LayoutConfig(display_length_L0=1.3, spring_constant_K=0.7)
    x = rng.normal(size=(8, 2))
    _, grad = layout_energy(x, dist, cfg)
    h = 1e-6
    num = np.zeros_like(x)
    for i in range(8):
        for k in range(2):
            xp, xm = x.copy(), x.copy()
            xp[i, k] += h
            xm[i, k] -= h
            num[i, k] = (layout_energy(xp, dist, cfg)[0] - layout_energy(xm, dist, cfg)[0]) / (2 * h)
    assert np.linalg.norm(num - grad) <= 1e-4 * max(1.0, np.linalg.norm(grad))


def test_energy_rigid_motion_invariant():
    g = random_graph(random.Random(3), 10)
    dist = shortest_path_distances(g)
    x = np.random.default_rng(0).normal(size=(10, 2))
    E = layout_energy(x, dist)[0]
    t = 0.7
    rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    assert layout_energy(x + [3.0, -8.0], dist)[0] == pytest.approx(E, rel=1e-12)
    assert layout_energy(x @ rot.T, dist)[0] == pytest.approx(E, rel=1e-12)


def test_shortest_paths_examples():
    assert shortest_path_distances(PATH, "unit").matrix[0, 2] == 2.0
    heavy = CoGraph.from_weights({("A", "B"): 4, ("B", "C"): 4})
    assert shortest_path_distances(heavy, "inverse").matrix[0, 1] == pytest.approx(0.25)
    assert shortest_path_distances(heavy, "inverse").matrix[0, 2] == pytest.approx(0.5)


@pytest.mark.parametrize("mode", ["inverse", "unit"])
def test_shortest_paths_match_oracle(mode):
    g = random_graph(random.Random(12), 30, p=0.1, wmax=9)
    got = shortest_path_distances(g, mode).matrix
    for s in range(30):
        assert np.allclose(got[s], single_source(g, s, mode), rtol=1e-12)


def test_disconnected_and_bad_mode_rejected():
    g = CoGraph.from_weights({("A", "B"): 1, ("C", "D"): 1})
    with pytest.raises(InputError):
        shortest_path_distances(g)
    with pytest.raises(ValidationError):
        shortest_path_distances(PATH, "euclid")


def test_config_validation():
    with pytest.raises(ValidationError):
        LayoutConfig(display_length_L0=0)
    with pytest.raises(ValidationError):
        LayoutConfig(max_outer_iters=0)
    assert LayoutConfig(display_length_L0=2).gap == 0.5


def test_components_tiled_without_overlap():
    g = CoGraph.from_weights(
        {("a", "b"): 5, ("b", "c"): 5, ("a", "c"): 5, ("d", "e"): 1, ("f", "g"): 2, ("g", "h"): 2}
    )
    cfg = LayoutConfig()
    res = layout_graph(g, cfg)
    assert set(res.nodes) == set(g.nodes)
    pos = dict(zip(res.nodes, res.coordinates))
    comps = [["a", "b", "c"], ["f", "g", "h"], ["d", "e"]]
    boxes = []
    for comp in comps:
        c = np.array([pos[v] for v in comp])
        boxes.append((c.min(axis=0), c.max(axis=0)))
    for i in range(3):
        for j in range(i + 1, 3):
            (alo, ahi), (blo, bhi) = boxes[i], boxes[j]
            sep = max(blo[0] - ahi[0], alo[0] - bhi[0], blo[1] - ahi[1], alo[1] - bhi[1])
            assert sep >= cfg.gap - 1e-9
    # Heaviest component comes first, at the top-left.
    assert res.nodes[:3] == ("a", "b", "c")


def test_tile_requires_layouts():
    with pytest.raises(ValidationError):
        tile_components([])


def test_layout_deterministic():
    g = random_graph(random.Random(6), 25, p=0.15)
    a, b = layout_graph(g), layout_graph(g)
    assert np.array_equal(a.coordinates, b.coordinates) and a.iterations_used == b.iterations_used


def test_kamada_kawai_rejects_bad_matrix():
    with pytest.raises(InputError):
        kamada_kawai(DistanceMatrix(np.array([[0, 0.0], [0.0, 0]])))
    with pytest.raises(InputError):
        kamada_kawai(DistanceMatrix(np.zeros((0, 0))))


def test_stiff_small_graph_converges():
    # Heavy co-occurrence weights give tiny inverse distances and very stiff springs.
    w = {("a", "b"): 1438, ("a", "c"): 848, ("a", "d"): 573, ("a", "e"): 472, ("b", "c"): 411,
         ("b", "d"): 307, ("b", "e"): 238, ("c", "d"): 168, ("c", "e"): 138, ("d", "e"): 91}
    g = CoGraph.from_weights(w)
    cfg = LayoutConfig()
    dist = shortest_path_distances(g)
    res = kamada_kawai(dist, cfg)
    assert res.converged
    # The incrementally tracked gradient must agree with a fresh evaluation.
    _, grad = layout_energy(res.coordinates, dist, cfg)
    assert np.hypot(grad[:, 0], grad[:, 1]).max() < 10 * cfg.newton_tol
    assert res.final_energy <= res.initial_energy
