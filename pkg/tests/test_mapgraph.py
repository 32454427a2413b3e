import itertools
import math

import pytest

from rvsenv.errors import NodeNotInGraph, NoPath, NoStreets
from rvsenv.geo import EARTH_RADIUS_M, BoundingBox, GeoPoint, haversine_distance
from rvsenv.mapgraph import (
    KIND_JUNCTION,
    KIND_LANDMARK,
    KIND_PROJECTION,
    build_map_graph,
    graph_stats,
    load_graph,
    prominence_rank,
    save_graph,
    shortest_path,
)
from rvsenv.osm import Landmark, Street

BASE = GeoPoint(40.75, -73.99)


def _pt(dx_m, dy_m):
    """Point offset from BASE by meters east/north (local frame inverse)."""
    dlat = dy_m / (EARTH_RADIUS_M * math.pi / 180.0)
    dlng = dx_m / (EARTH_RADIUS_M * math.cos(math.radians(BASE.lat)) * math.pi / 180.0)
    return GeoPoint(BASE.lat + dlat, BASE.lng + dlng)


def _street(sid, pts, name=None, start_ref=1000):
    refs = [start_ref + i for i in range(len(pts))]
    return Street(sid, name, {"highway": "residential"}, refs, pts)


def _landmark(lid, point, tags=None):
    return Landmark(lid, None, tags or {"amenity": "cafe"}, [point], point)


def test_no_streets_raises():
    with pytest.raises(NoStreets):
        build_map_graph([], [])


def test_single_street_single_projection():
    street = _street("w1", [_pt(0, 0), _pt(200, 0)])
    lm = _landmark("a", _pt(100, 30))
    g = build_map_graph([lm], [street])
    lm_node = g.nodes["La"]
    assert lm_node.kind == KIND_LANDMARK
    assert len(g.adj["La"]) == 1


def test_projection_weight_matches_point_to_segment():
    # Landmark 10 m north of a straight east-west street: the closed-form
    # point-to-segment distance is exactly the offset.
    street = _street("w1", [_pt(0, 0), _pt(300, 0)])
    lm = _landmark("a", _pt(150, 10))
    g = build_map_graph([lm], [street])
    (proj_id, weight), = g.adj["La"].items()
    assert weight == pytest.approx(10.0, abs=0.5)
    assert g.nodes[proj_id].kind == KIND_PROJECTION


def test_four_street_grid_gives_four_projections():
    size = 200.0
    streets = [
        _street("w_s", [_pt(0, 0), _pt(size, 0)], start_ref=1000),
        _street("w_n", [_pt(0, size), _pt(size, size)], start_ref=2000),
        _street("w_w", [_pt(0, 0), _pt(0, size)], start_ref=3000),
        _street("w_e", [_pt(size, 0), _pt(size, size)], start_ref=4000),
    ]
    lm = _landmark("mid", _pt(size / 2, size / 2))
    g = build_map_graph([lm], streets)
    assert len(g.adj["Lmid"]) == 4
    for weight in g.adj["Lmid"].values():
        assert weight == pytest.approx(size / 2, rel=0.01)


def test_distinct_ways_deduplicated():
    # One long street: even with several near segments, only one projection.
    street = _street("w1", [_pt(0, 0), _pt(100, 0), _pt(200, 0), _pt(300, 0)])
    lm = _landmark("a", _pt(150, 20))
    g = build_map_graph([lm], [street])
    assert len(g.adj["La"]) == 1


def test_far_landmark_skipped_with_warning(caplog):
    street = _street("w1", [_pt(0, 0), _pt(100, 0)])
    lm = _landmark("far", _pt(50, 2000))
    with caplog.at_level("WARNING"):
        g = build_map_graph([lm], [street])
    assert "Lfar" not in g.nodes
    assert any("farther" in rec.message for rec in caplog.records)


def test_shared_endpoints_merge():
    streets = [
        _street("w1", [_pt(0, 0), _pt(100, 0)], start_ref=1000),
        # same corner point under a different OSM id, 0.2 m off
        _street("w2", [_pt(100, 0.2), _pt(100, 100)], start_ref=2000),
    ]
    g = build_map_graph([], streets)
    junctions = g.nodes_of_kind(KIND_JUNCTION)
    assert len(junctions) == 3
    path, length = shortest_path(g, "J0", sorted(n.id for n in junctions)[-1])
    assert length == pytest.approx(200.0, rel=0.01)


def test_edge_weights_match_haversine():
    streets = [_street("w1", [_pt(0, 0), _pt(137, 0), _pt(137, 80)])]
    g = build_map_graph([], streets)
    for a, nbrs in g.adj.items():
        for b, w in nbrs.items():
            d = haversine_distance(g.nodes[a].point, g.nodes[b].point)
            assert w == pytest.approx(d, abs=0.5)


# -- prominence -------------------------------------------------------------

def test_prominence_ladder_order():
    assert prominence_rank({"wikipedia": "en:X", "shop": "bakery"}) == 0
    assert prominence_rank({"wikidata": "Q1"}) == 1
    assert prominence_rank({"brand": "X"}) == 2
    assert prominence_rank({"tourism": "museum"}) == 3
    assert prominence_rank({"amenity": "cafe"}) == 4
    assert prominence_rank({"shop": "bakery"}) == 5
    assert prominence_rank({"name": "X"}) is None


def test_prominence_monotone_under_added_tags():
    import random

    rnd = random.Random(0)
    keys = ["wikipedia", "wikidata", "brand", "tourism", "amenity", "shop"]
    for _ in range(100):
        base = {k: "x" for k in rnd.sample(keys, rnd.randint(0, 5))}
        rank = prominence_rank(base)
        higher = rnd.choice(keys)
        extended = dict(base, **{higher: "y"})
        new_rank = prominence_rank(extended)
        if rank is not None:
            assert new_rank is not None and new_rank <= rank


# -- shortest path ------------------------------------------------------------

def test_shortest_path_identity():
    g = build_map_graph([], [_street("w1", [_pt(0, 0), _pt(100, 0)])])
    path, length = shortest_path(g, "J0", "J0")
    assert path == ["J0"] and length == 0.0


def test_shortest_path_single_edge():
    g = build_map_graph([], [_street("w1", [_pt(0, 0), _pt(100, 0)])])
    path, length = shortest_path(g, "J0", "J1")
    assert len(path) == 2
    assert length == pytest.approx(100.0, rel=0.005)


def _enumerate_paths(g, a, b):
    """Exhaustive simple-path oracle for small fixtures."""
    best = math.inf
    stack = [(a, {a}, 0.0)]
    while stack:
        cur, seen, total = stack.pop()
        if cur == b:
            best = min(best, total)
            continue
        for nb, w in g.adj[cur].items():
            if nb not in seen:
                stack.append((nb, seen | {nb}, total + w))
    return best


def test_square_grid_opposite_corners():
    size = 100.0
    streets = [
        _street("w_s", [_pt(0, 0), _pt(size, 0)], start_ref=1000),
        _street("w_n", [_pt(0, size), _pt(size, size)], start_ref=2000),
        _street("w_w", [_pt(0, 0), _pt(0, size)], start_ref=3000),
        _street("w_e", [_pt(size, 0), _pt(size, size)], start_ref=4000),
    ]
    g = build_map_graph([], streets)
    corner_a = "J0"
    corner_b = next(
        n.id for n in g.nodes.values()
        if haversine_distance(n.point, _pt(size, size)) < 1.0
    )
    path, length = shortest_path(g, corner_a, corner_b)
    assert length == pytest.approx(2 * size, rel=0.01)  # two sides, not a diagonal
    assert length == pytest.approx(_enumerate_paths(g, corner_a, corner_b), rel=1e-9)


def test_shortest_path_errors():
    g = build_map_graph([], [
        _street("w1", [_pt(0, 0), _pt(100, 0)], start_ref=1000),
        _street("w2", [_pt(0, 500), _pt(100, 500)], start_ref=2000),
    ])
    with pytest.raises(NodeNotInGraph):
        shortest_path(g, "J0", "missing")
    with pytest.raises(NoPath):
        shortest_path(g, "J0", "J2")


def test_shortest_path_dominates_geodesic():
    streets = [
        _street("w1", [_pt(0, 0), _pt(100, 0), _pt(200, 0), _pt(200, 100)]),
    ]
    g = build_map_graph([], streets)
    ids = sorted(g.nodes)
    for a, b in itertools.combinations(ids, 2):
        _, length = shortest_path(g, a, b)
        assert length >= haversine_distance(g.nodes[a].point, g.nodes[b].point) - 1e-6


def test_scipy_batch_agrees_with_dijkstra():
    size = 100.0
    streets = [
        _street("w_s", [_pt(0, 0), _pt(size, 0)], start_ref=1000),
        _street("w_n", [_pt(0, size), _pt(size, size)], start_ref=2000),
        _street("w_w", [_pt(0, 0), _pt(0, size)], start_ref=3000),
        _street("w_e", [_pt(size, 0), _pt(size, size)], start_ref=4000),
    ]
    g = build_map_graph([], streets)
    ids, index, dist = g.batch_distances(["J0"])
    for target in ids:
        own = shortest_path(g, "J0", target)[1]
        assert dist[0][index[target]] == pytest.approx(own, rel=1e-9)


# -- stats and serialization ---------------------------------------------------

def test_stats_counts():
    region = BoundingBox(south=40.74, west=-74.00, north=40.76, east=-73.98)
    g = build_map_graph([], [_street("w1", [_pt(0, 0), _pt(100, 0)])], region=region)
    stats = graph_stats(g)
    assert stats["num_landmarks"] == 0
    assert stats["num_streets"] == 1
    assert stats["num_nodes"] == 2
    assert stats["num_edges"] == 1
    assert stats["area_km2"] == pytest.approx(region.area_km2())


def test_save_load_roundtrip_stable(tmp_path):
    street = _street("w1", [_pt(0, 0), _pt(300, 0)])
    lm = _landmark("a", _pt(150, 10), tags={"amenity": "cafe", "wikipedia": "en:A"})
    g = build_map_graph([lm], [street],
                        region=BoundingBox(south=40.74, west=-74.0, north=40.76, east=-73.98))
    p1, p2 = tmp_path / "g1.jsonl", tmp_path / "g2.jsonl"
    save_graph(g, p1)
    g2 = load_graph(p1)
    save_graph(g2, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert graph_stats(g2) == graph_stats(g)
