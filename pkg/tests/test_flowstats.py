import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from basketflow.cograph import CoGraph
from basketflow.errors import ValidationError
from basketflow.flowstats import (
    community_flow_summary,
    coverage_subgraph,
    flow_report,
    node_flow_shares,
    ranking_csv,
    top_connections,
)
from basketflow.mapequation import Partition
from oracles import prefix_count, random_graph

K2 = CoGraph.from_weights({("A", "B"): 1})
STAR = CoGraph.from_weights({("c", "x"): 1, ("c", "y"): 1, ("c", "z"): 1})


def test_k2_shares():
    assert node_flow_shares(K2).node_shares == [("A", 50.0), ("B", 50.0)]


def test_star_shares():
    rep = node_flow_shares(STAR)
    assert rep.node_shares[0] == ("c", 50.0)
    assert [round(s, 3) for _, s in rep.node_shares[1:]] == [16.667] * 3
    assert rep.cumulative[-1] == pytest.approx(100.0, abs=1e-9)


def test_ranking_csv():
    lines = ranking_csv(node_flow_shares(STAR)).splitlines()
    assert lines[0] == "rank,attraction,share_pct"
    assert lines[1] == "1,c,50.00" and lines[2] == "2,x,16.67"


def test_one_module_summary():
    internal, between = community_flow_summary(STAR, Partition.one_module(4))
    assert internal == pytest.approx([100.0]) and between == {}


def test_intermodule_ratio():
    # Two triangles of unit edges plus a weight-3 edge inside one and a single bridge: total weight 10.
    g = CoGraph.from_weights(
        {("a", "b"): 1, ("b", "c"): 1, ("a", "c"): 3, ("d", "e"): 1, ("e", "f"): 1, ("d", "f"): 2, ("c", "d"): 1}
    )
    assert g.total_weight == 10
    part = Partition.from_labels([0, 0, 0, 1, 1, 1])
    internal, between = community_flow_summary(g, part)
    assert between == {(0, 1): pytest.approx(10.0)}
    assert sum(internal) == pytest.approx(100.0, abs=1e-9)


def test_top_connections_examples():
    assert len(top_connections(STAR, "c", 5).neighbors) == 3
    g = CoGraph.from_weights({("c", "p"): 5, ("c", "q"): 3, ("c", "r"): 1})
    grp = top_connections(g, "c", 2)
    assert [v for v, _ in grp.neighbors] == ["p", "q"]
    assert grp.neighbors[0][1] == pytest.approx(100 * 5 / 9)
    with pytest.raises(KeyError):
        top_connections(g, "nope", 2)


@pytest.mark.parametrize("seed", range(10))
def test_top_connections_full_sort_oracle(seed):
    g = random_graph(random.Random(seed), 25, p=0.4, wmax=4)
    total = g.total_weight
    for center in g.nodes[:5]:
        everything = sorted(
            ((u, 100 * g.weight(center, u) / total) for u in g.nodes if u != center and g.weight(center, u)),
            key=lambda t: (-t[1], t[0]),
        )
        for k in (1, 3, 5, 50):
            assert list(top_connections(g, center, k).neighbors) == everything[:k]


def test_top_connections_prefix_property():
    g = random_graph(random.Random(4), 20, p=0.5, wmax=3)
    for k in range(1, 10):
        a = top_connections(g, "v05", k).neighbors
        b = top_connections(g, "v05", k + 1).neighbors
        assert b[: len(a)] == a


def test_coverage_examples():
    assert coverage_subgraph(STAR, 100).nodes == STAR.nodes
    sub = coverage_subgraph(K2, 50)
    assert sub.node_count == 1 and sub.edge_count == 0
    with pytest.raises(ValidationError):
        coverage_subgraph(K2, 0)
    with pytest.raises(ValidationError):
        coverage_subgraph(K2, 100.5)


def test_coverage_max_edges():
    g = random_graph(random.Random(9), 20, p=0.5, wmax=9)
    sub = coverage_subgraph(g, 90, max_edges=7)
    assert sub.edge_count == 7
    full = coverage_subgraph(g, 90)
    assert sorted(sub.edges.values(), reverse=True) == sorted(full.edges.values(), reverse=True)[:7]


@settings(max_examples=40)
@given(st.integers(0, 10**6), st.floats(1, 100), st.floats(0, 50))
def test_coverage_monotone_and_prefix(seed, target, more):
    g = random_graph(random.Random(seed), 15, p=0.3, wmax=6)
    small = coverage_subgraph(g, target)
    big = coverage_subgraph(g, min(100.0, target + more))
    assert set(small.nodes) <= set(big.nodes)
    shares = [s for _, s in node_flow_shares(g).node_shares]
    assert small.node_count == prefix_count(shares, target)


@settings(max_examples=30)
@given(st.integers(0, 10**6), st.sampled_from([0.5, 3, 1000]))
def test_rankings_scale_invariant(seed, factor):
    g = random_graph(random.Random(seed), 15, p=0.3, wmax=6)
    h = g.scaled(factor)
    assert [v for v, _ in node_flow_shares(g).node_shares] == [v for v, _ in node_flow_shares(h).node_shares]
    assert coverage_subgraph(g, 60).nodes == coverage_subgraph(h, 60).nodes
    assert [v for v, _ in top_connections(g, "v03", 4).neighbors] == [v for v, _ in top_connections(h, "v03", 4).neighbors]


def test_flow_report_with_partition():
    g = random_graph(random.Random(2), 12)
    rep = flow_report(g, Partition.from_labels([v % 3 for v in range(12)]))
    assert sum(rep.community_internal) == pytest.approx(100.0, abs=1e-9)
    assert all(i < j for i, j in rep.intermodule_flows)
