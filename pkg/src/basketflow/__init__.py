"""Attraction baskets, co-occurrence networks and map-equation communities."""

from basketflow.cograph import CoGraph, GraphStats, build_cooccurrence, connected_components, prune
from basketflow.communities import (
    CommunityResult,
    DetectConfig,
    detect_communities,
    exhaustive_min_partition,
    move_gain,
)
from basketflow.errors import (
    BasketflowError,
    EmptyResultError,
    InputError,
    InvariantError,
    SchemaError,
    ValidationError,
)
from basketflow.flowstats import (
    ConnectionGroup,
    FlowReport,
    community_flow_summary,
    coverage_subgraph,
    flow_report,
    node_flow_shares,
    top_connections,
)
from basketflow.ingest import PostRecord, SyntheticParams, dedup_exact, generate_synthetic, parse_posts, read_posts
from basketflow.layout import (
    DistanceMatrix,
    LayoutConfig,
    LayoutResult,
    kamada_kawai,
    layout_energy,
    layout_graph,
    shortest_path_distances,
    tile_components,
)
from basketflow.mapequation import MapEqTerms, Partition, exit_weights, map_equation, node_relative_weights
from basketflow.sessionizer import (
    AttractionSet,
    WindowConfig,
    build_attraction_sets,
    drop_singletons,
    order_posts,
    sessionize,
)

__version__ = "0.1.0"
