"""The environment graph: street junctions, landmarks, and projections.

Street polylines become chains of junction nodes with haversine-weighted
edges; each landmark is projected onto its nearest streets (up to four
distinct ways) through projection nodes spliced into the street edges.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NodeNotInGraph, NoPath, NoStreets
from .geo import EARTH_RADIUS_M, BoundingBox, GeoPoint, haversine_distance

log = logging.getLogger(__name__)

KIND_JUNCTION = "junction"
KIND_PROJECTION = "projection"
KIND_LANDMARK = "landmark"

MERGE_TOL_M = 0.5
MAX_PROJECTION_M = 500.0
MAX_STREETS_PER_LANDMARK = 4

# Prominence ladder, most prominent first.
PROMINENCE_LADDER = ("wikipedia", "wikidata", "brand", "tourism", "amenity", "shop")


def prominence_rank(tags) -> int | None:
    """Rung of the six-tag prominence ladder; None when not prominent."""
    for rank, key in enumerate(PROMINENCE_LADDER):
        if key in tags:
            return rank
    return None


@dataclass
class MapNode:
    id: str
    kind: str
    point: GeoPoint
    tags: dict = field(default_factory=dict)


class MapGraph:
    """Undirected graph with haversine-weighted edges and typed nodes."""

    def __init__(self, region: BoundingBox | None = None):
        self.nodes: dict[str, MapNode] = {}
        self.adj: dict[str, dict[str, float]] = {}
        self.region = region
        self.num_street_ways = 0
        self._csr_cache = None
        self._coord_cache = None

    # construction ------------------------------------------------------

    def add_node(self, node: MapNode):
        self.nodes[node.id] = node
        self.adj.setdefault(node.id, {})
        self._csr_cache = self._coord_cache = None

    def add_edge(self, a: str, b: str, weight: float):
        if a == b:
            return
        self.adj[a][b] = weight
        self.adj[b][a] = weight
        self._csr_cache = self._coord_cache = None

    # views ---------------------------------------------------------------

    def num_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self.adj.values()) // 2

    def nodes_of_kind(self, kind: str):
        return [n for n in self.nodes.values() if n.kind == kind]

    def sorted_ids(self):
        return sorted(self.nodes)

    def coords(self):
        """(ids, lat array, lng array) over all nodes, sorted by id."""
        if self._coord_cache is None:
            ids = self.sorted_ids()
            lat = np.array([self.nodes[i].point.lat for i in ids])
            lng = np.array([self.nodes[i].point.lng for i in ids])
            self._coord_cache = (ids, lat, lng)
        return self._coord_cache

    def to_csr(self):
        """(ids, id->index map, scipy CSR adjacency) for batch queries."""
        if self._csr_cache is None:
            from scipy.sparse import csr_matrix

            ids = self.sorted_ids()
            index = {nid: k for k, nid in enumerate(ids)}
            rows, cols, vals = [], [], []
            for a in ids:
                ia = index[a]
                for b, w in self.adj[a].items():
                    rows.append(ia)
                    cols.append(index[b])
                    vals.append(w)
            mat = csr_matrix((vals, (rows, cols)), shape=(len(ids), len(ids)))
            self._csr_cache = (ids, index, mat)
        return self._csr_cache

    def batch_distances(self, source_ids, cutoff=None):
        """Shortest-path length rows from each source (scipy Dijkstra)."""
        from scipy.sparse.csgraph import dijkstra as csgraph_dijkstra

        ids, index, mat = self.to_csr()
        idx = [index[s] for s in source_ids]
        limit = np.inf if cutoff is None else cutoff
        dist = csgraph_dijkstra(mat, directed=False, indices=idx, limit=limit)
        return ids, index, dist

    def largest_component(self):
        """Node ids of the largest connected component."""
        seen = set()
        best = set()
        for start in self.sorted_ids():
            if start in seen:
                continue
            comp = {start}
            stack = [start]
            while stack:
                cur = stack.pop()
                for nb in self.adj[cur]:
                    if nb not in comp:
                        comp.add(nb)
                        stack.append(nb)
            seen |= comp
            if len(comp) > len(best):
                best = comp
        return best


# -- local planar frame --------------------------------------------------

class _LocalFrame:
    """Equirectangular meters around a reference latitude; sub-mm error at
    city scale, used only for nearest-segment searches."""

    def __init__(self, ref: GeoPoint):
        self.ref = ref
        self._kx = math.cos(math.radians(ref.lat)) * math.pi / 180.0 * EARTH_RADIUS_M
        self._ky = math.pi / 180.0 * EARTH_RADIUS_M

    def xy(self, p: GeoPoint):
        return (p.lng - self.ref.lng) * self._kx, (p.lat - self.ref.lat) * self._ky


class _SegmentIndex:
    """Bucket grid over street segments for radius-limited candidate lookup."""

    def __init__(self, streets, frame, cell=250.0):
        self.frame = frame
        self.cell = cell
        self.ax, self.ay, self.bx, self.by = [], [], [], []
        self.way_idx, self.seg_idx = [], []
        self.buckets = {}
        for wi, street in enumerate(streets):
            xs, ys = zip(*(frame.xy(p) for p in street.points))
            for si in range(len(street.points) - 1):
                k = len(self.ax)
                self.ax.append(xs[si]); self.ay.append(ys[si])
                self.bx.append(xs[si + 1]); self.by.append(ys[si + 1])
                self.way_idx.append(wi)
                self.seg_idx.append(si)
                for cx in {int(xs[si] // cell), int(xs[si + 1] // cell)}:
                    for cy in {int(ys[si] // cell), int(ys[si + 1] // cell)}:
                        self.buckets.setdefault((cx, cy), []).append(k)
        self.ax = np.array(self.ax); self.ay = np.array(self.ay)
        self.bx = np.array(self.bx); self.by = np.array(self.by)
        self.way_idx = np.array(self.way_idx)
        self.seg_idx = np.array(self.seg_idx)

    def candidates(self, x, y, radius):
        r = int(radius // self.cell) + 1
        cx0, cy0 = int(x // self.cell), int(y // self.cell)
        out = []
        for cx in range(cx0 - r, cx0 + r + 1):
            for cy in range(cy0 - r, cy0 + r + 1):
                out.extend(self.buckets.get((cx, cy), ()))
        return np.unique(np.array(out, dtype=np.int64)) if out else np.array([], dtype=np.int64)

    def nearest_per_way(self, x, y, radius):
        """[(distance, way_idx, seg_idx, t)] of the nearest point per way."""
        cand = self.candidates(x, y, radius)
        if len(cand) == 0:
            return []
        ax, ay = self.ax[cand], self.ay[cand]
        dx, dy = self.bx[cand] - ax, self.by[cand] - ay
        seg_len2 = dx * dx + dy * dy
        t = np.where(seg_len2 > 0, ((x - ax) * dx + (y - ay) * dy) / np.maximum(seg_len2, 1e-12), 0.0)
        t = np.clip(t, 0.0, 1.0)
        qx, qy = ax + t * dx, ay + t * dy
        dist = np.hypot(x - qx, y - qy)
        best = {}
        for k in range(len(cand)):
            if dist[k] > radius:
                continue
            wi = int(self.way_idx[cand[k]])
            cur = best.get(wi)
            if cur is None or dist[k] < cur[0] - 1e-9:
                best[wi] = (float(dist[k]), wi, int(self.seg_idx[cand[k]]), float(t[k]))
        return sorted(best.values())


def _interp(pa: GeoPoint, pb: GeoPoint, t: float) -> GeoPoint:
    return GeoPoint(pa.lat + t * (pb.lat - pa.lat), pa.lng + t * (pb.lng - pa.lng))


def build_map_graph(landmarks, streets, region: BoundingBox | None = None,
                    merge_tol: float = MERGE_TOL_M,
                    max_projection: float = MAX_PROJECTION_M) -> MapGraph:
    """Assemble the environment graph from ingested landmarks and streets."""
    if not streets:
        raise NoStreets("graph construction needs at least one street")

    graph = MapGraph(region=region)
    graph.num_street_ways = len(streets)
    ref = streets[0].points[0]
    frame = _LocalFrame(ref)

    # Canonical junction per OSM node id, then coordinate-merge within
    # merge_tol (duplicated nodes in noisy extracts).
    tol_grid = {}
    ref_to_node: dict = {}
    next_j = 0

    def junction_for(ref_id, point):
        nonlocal next_j
        if ref_id in ref_to_node:
            return ref_to_node[ref_id]
        x, y = frame.xy(point)
        cx, cy = int(x // merge_tol), int(y // merge_tol)
        for bx in (cx - 1, cx, cx + 1):
            for by in (cy - 1, cy, cy + 1):
                for nid, (nx, ny) in tol_grid.get((bx, by), ()):
                    if math.hypot(nx - x, ny - y) <= merge_tol:
                        ref_to_node[ref_id] = nid
                        return nid
        nid = f"J{next_j}"
        next_j += 1
        graph.add_node(MapNode(nid, KIND_JUNCTION, point))
        tol_grid.setdefault((cx, cy), []).append((nid, (x, y)))
        ref_to_node[ref_id] = nid
        return nid

    way_chains = []
    for street in streets:
        chain = []
        for ref_id, point in zip(street.node_ids, street.points):
            nid = junction_for(ref_id, point)
            if not chain or chain[-1][0] != nid:
                chain.append((nid, point))
        way_chains.append(chain)

    # Landmark projections: nearest point on each of up to four distinct
    # ways, collected per segment so splices chain correctly.
    index = _SegmentIndex(streets, frame)
    splices = {}  # (way_idx, seg_idx) -> list[(t, proj_node_id)]
    next_p = 0
    kept_landmarks = []
    for lm in landmarks:
        x, y = frame.xy(lm.centroid)
        per_way = index.nearest_per_way(x, y, max_projection)[:MAX_STREETS_PER_LANDMARK]
        if not per_way:
            log.warning("landmark %s is farther than %.0f m from every street; skipped",
                        lm.id, max_projection)
            continue
        lm_node = f"L{lm.id}"
        graph.add_node(MapNode(lm_node, KIND_LANDMARK, lm.centroid, dict(lm.tags)))
        kept_landmarks.append(lm)
        for _, wi, si, t in per_way:
            chain = way_chains[wi]
            # segment index refers to the street's raw points; map onto the
            # deduplicated chain (identical except for merged repeats)
            pa, pb = streets[wi].points[si], streets[wi].points[si + 1]
            q = _interp(pa, pb, t)
            # snap to an existing chain node when the projection hits it
            snapped = None
            for nid, pt in chain:
                if haversine_distance(pt, q) <= merge_tol:
                    snapped = nid
                    break
            if snapped is None:
                pid = f"P{next_p}"
                next_p += 1
                graph.add_node(MapNode(pid, KIND_PROJECTION, q))
                splices.setdefault((wi, si), []).append((t, pid))
                snapped = pid
            graph.add_edge(lm_node, snapped, haversine_distance(lm.centroid, q))

    # Street edges with projection nodes spliced in.
    for wi, street in enumerate(streets):
        for si in range(len(street.points) - 1):
            pa, pb = street.points[si], street.points[si + 1]
            na = ref_to_node[street.node_ids[si]]
            nb = ref_to_node[street.node_ids[si + 1]]
            inserted = sorted(splices.get((wi, si), []))
            chain_pts = [(na, pa)] + [
                (pid, graph.nodes[pid].point) for _, pid in inserted
            ] + [(nb, pb)]
            for k in range(len(chain_pts) - 1):
                (ida, a), (idb, b) = chain_pts[k], chain_pts[k + 1]
                if ida != idb:
                    graph.add_edge(ida, idb, haversine_distance(a, b))

    return graph


# -- queries --------------------------------------------------------------

def shortest_path(graph: MapGraph, a: str, b: str):
    """Dijkstra path and length in meters between two node ids."""
    if a not in graph.nodes:
        raise NodeNotInGraph(a)
    if b not in graph.nodes:
        raise NodeNotInGraph(b)
    if a == b:
        return [a], 0.0
    dist = {a: 0.0}
    prev = {}
    heap = [(0.0, a)]
    done = set()
    while heap:
        d, cur = heapq.heappop(heap)
        if cur in done:
            continue
        if cur == b:
            path = [b]
            while path[-1] != a:
                path.append(prev[path[-1]])
            return path[::-1], d
        done.add(cur)
        for nb, w in graph.adj[cur].items():
            nd = d + w
            if nd < dist.get(nb, math.inf):
                dist[nb] = nd
                prev[nb] = cur
                heapq.heappush(heap, (nd, nb))
    raise NoPath(f"{a} and {b} are disconnected")


def graph_stats(graph: MapGraph) -> dict:
    """Exact node/edge/landmark counts plus region area."""
    return {
        "num_landmarks": len(graph.nodes_of_kind(KIND_LANDMARK)),
        "num_streets": graph.num_street_ways,
        "num_nodes": len(graph.nodes),
        "num_edges": graph.num_edges(),
        "area_km2": graph.region.area_km2() if graph.region else None,
    }


# -- serialization ---------------------------------------------------------

def save_graph(graph: MapGraph, path):
    """Versioned JSON-lines dump: meta, then nodes, then edges."""
    with open(path, "w", encoding="utf-8") as fh:
        meta = {
            "kind": "meta",
            "version": 1,
            "num_street_ways": graph.num_street_ways,
            "region": (
                [graph.region.south, graph.region.west, graph.region.north, graph.region.east]
                if graph.region else None
            ),
        }
        fh.write(json.dumps(meta, sort_keys=True) + "\n")
        for nid in graph.sorted_ids():
            n = graph.nodes[nid]
            rec = {"kind": "node", "id": n.id, "node_kind": n.kind,
                   "lat": n.point.lat, "lng": n.point.lng}
            if n.tags:
                rec["tags"] = n.tags
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        for a in graph.sorted_ids():
            for b in sorted(graph.adj[a]):
                if a < b:
                    fh.write(json.dumps(
                        {"kind": "edge", "a": a, "b": b, "w": graph.adj[a][b]},
                        sort_keys=True) + "\n")


def load_graph(path) -> MapGraph:
    graph = MapGraph()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if rec["kind"] == "meta":
                graph.num_street_ways = rec["num_street_ways"]
                if rec["region"]:
                    s, w, n, e = rec["region"]
                    graph.region = BoundingBox(south=s, west=w, north=n, east=e)
            elif rec["kind"] == "node":
                graph.add_node(MapNode(rec["id"], rec["node_kind"],
                                       GeoPoint(rec["lat"], rec["lng"]),
                                       rec.get("tags", {})))
            else:
                graph.add_edge(rec["a"], rec["b"], rec["w"])
    return graph
