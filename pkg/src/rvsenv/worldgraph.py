"""Heterogeneous location + cell graph and random-walk corpus generation.

Cell nodes cover the region at three grid levels; location nodes (one per
landmark) hang off their containing finest-level cell. Edges: containment,
same-level rook neighbors, child-to-parent, and fully-connected sibling
quads at the middle level.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMapGraph
from .geo import BoundingBox
from .mapgraph import KIND_LANDMARK, MapGraph
from .s2grid import RegionRect, cell_from_point, cell_ij, region_rect

DEFAULT_LEVELS = (15, 16, 17)
SIBLING_QUAD_LEVEL = 16


@dataclass
class WorldGraph:
    """Immutable node list (fixed order) plus CSR-style adjacency."""

    node_ids: list          # cell tokens then location ids, build order
    node_index: dict        # id -> position in node_ids
    edges: set              # frozenset of (i, j) index pairs, i < j
    levels: tuple
    rects: dict             # level -> RegionRect
    region: BoundingBox

    def num_nodes(self):
        return len(self.node_ids)

    def num_edges(self):
        return len(self.edges)

    def degree(self, node_id):
        k = self.node_index[node_id]
        return sum(1 for e in self.edges if k in e)

    def neighbors(self, node_id):
        k = self.node_index[node_id]
        out = []
        for a, b in self.edges:
            if a == k:
                out.append(self.node_ids[b])
            elif b == k:
                out.append(self.node_ids[a])
        return sorted(out)

    def to_csr(self):
        """(indptr, indices) adjacency in node order, neighbors sorted."""
        n = len(self.node_ids)
        adj = [[] for _ in range(n)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        indptr = np.zeros(n + 1, dtype=np.int64)
        for k in range(n):
            adj[k].sort()
            indptr[k + 1] = indptr[k] + len(adj[k])
        indices = np.empty(indptr[-1], dtype=np.int32)
        for k in range(n):
            indices[indptr[k]:indptr[k + 1]] = adj[k]
        return indptr, indices


def build_world_graph(graph: MapGraph, region: BoundingBox | None = None,
                      levels=DEFAULT_LEVELS) -> WorldGraph:
    """Instantiate region cells at all levels and wire the edge rules."""
    landmarks = graph.nodes_of_kind(KIND_LANDMARK)
    if not landmarks:
        raise EmptyMapGraph("world graph needs a map graph with landmarks")
    region = region or graph.region
    if region is None:
        raise EmptyMapGraph("world graph needs a region bounding box")

    levels = tuple(sorted(levels))
    finest = levels[-1]
    rects: dict[int, RegionRect] = {lvl: region_rect(region, lvl) for lvl in levels}

    node_ids, node_index = [], {}

    def add_node(nid):
        node_index[nid] = len(node_ids)
        node_ids.append(nid)

    # cell nodes, coarse to fine, row-major within a level
    cell_pos = {}  # (level, i, j) -> node position
    for lvl in levels:
        rect = rects[lvl]
        for j in range(rect.j0, rect.j1 + 1):
            for i in range(rect.i0, rect.i1 + 1):
                cell_pos[(lvl, i, j)] = len(node_ids)
                add_node(rect.cell_at(i, j).token())
    for lm in sorted(landmarks, key=lambda n: n.id):
        add_node(lm.id)

    edges = set()

    def connect(a, b):
        if a != b:
            edges.add((a, b) if a < b else (b, a))

    # same-level rook neighbors
    for lvl in levels:
        rect = rects[lvl]
        for j in range(rect.j0, rect.j1 + 1):
            for i in range(rect.i0, rect.i1 + 1):
                if i + 1 <= rect.i1:
                    connect(cell_pos[(lvl, i, j)], cell_pos[(lvl, i + 1, j)])
                if j + 1 <= rect.j1:
                    connect(cell_pos[(lvl, i, j)], cell_pos[(lvl, i, j + 1)])

    # child -> parent across consecutive levels
    for fine, coarse in zip(levels[1:], levels[:-1]):
        rect = rects[fine]
        coarse_rect = rects[coarse]
        for j in range(rect.j0, rect.j1 + 1):
            for i in range(rect.i0, rect.i1 + 1):
                pi, pj = i >> 1, j >> 1
                if coarse_rect.contains_ij(pi, pj):
                    connect(cell_pos[(fine, i, j)], cell_pos[(coarse, pi, pj)])

    # fully connect sibling quads at the middle level
    if SIBLING_QUAD_LEVEL in levels and SIBLING_QUAD_LEVEL != levels[0]:
        rect = rects[SIBLING_QUAD_LEVEL]
        for pj in range(rect.j0 >> 1, (rect.j1 >> 1) + 1):
            for pi in range(rect.i0 >> 1, (rect.i1 >> 1) + 1):
                members = [
                    cell_pos[(SIBLING_QUAD_LEVEL, i, j)]
                    for i in (2 * pi, 2 * pi + 1)
                    for j in (2 * pj, 2 * pj + 1)
                    if rect.contains_ij(i, j)
                ]
                for x in range(len(members)):
                    for y in range(x + 1, len(members)):
                        connect(members[x], members[y])

    # location -> containing finest cell
    finest_rect = rects[finest]
    for lm in sorted(landmarks, key=lambda n: n.id):
        cell = cell_from_point(lm.point, finest)
        i, j = cell_ij(cell)
        if not finest_rect.contains_ij(i, j):
            raise EmptyMapGraph(
                f"landmark {lm.id} falls outside the region cell cover")
        connect(node_index[lm.id], cell_pos[(finest, i, j)])

    return WorldGraph(node_ids, node_index, edges, levels, rects, region)


class WalkCorpus:
    """Deterministic random-walk corpus, regenerated on demand in batches.

    Walks are uniform next-step transitions (node2vec with p = q = 1); a
    walk halts early only at a node with no neighbors. Entries are node
    indices into the world graph's node order; -1 pads halted walks.
    """

    def __init__(self, graph: WorldGraph, walks_per_node=200, walk_length=20,
                 seed=0, batch_walks=100_000):
        self.indptr, self.indices = graph.to_csr()
        self.node_ids = list(graph.node_ids)
        self.walks_per_node = walks_per_node
        self.walk_length = walk_length
        self.seed = seed
        self.batch_walks = batch_walks

    @property
    def num_nodes(self):
        return len(self.node_ids)

    @property
    def num_walks(self):
        return self.num_nodes * self.walks_per_node

    def batches(self):
        """Yield int32 arrays of shape (batch, walk_length)."""
        rng = np.random.default_rng(self.seed)
        starts = np.repeat(np.arange(self.num_nodes, dtype=np.int32),
                           self.walks_per_node)
        deg = np.diff(self.indptr)
        for lo in range(0, len(starts), self.batch_walks):
            cur = starts[lo:lo + self.batch_walks].copy()
            walks = np.full((len(cur), self.walk_length), -1, dtype=np.int32)
            walks[:, 0] = cur
            alive = deg[cur] > 0
            for step in range(1, self.walk_length):
                u = rng.random(len(cur))
                active = np.nonzero(alive)[0]
                if len(active) == 0:
                    break
                c = cur[active]
                pick = self.indptr[c] + np.floor(u[active] * deg[c]).astype(np.int64)
                nxt = self.indices[pick]
                cur[active] = nxt
                walks[active, step] = nxt
                alive[active] = deg[nxt] > 0
            yield walks

    def walks(self):
        """All walks as one array; only for small graphs."""
        return np.concatenate(list(self.batches()), axis=0)


def random_walks(graph: WorldGraph, walks_per_node=200, walk_length=20,
                 seed=0) -> WalkCorpus:
    """Walk corpus over the world graph; size = nodes x walks_per_node."""
    return WalkCorpus(graph, walks_per_node, walk_length, seed)


def save_world_graph(graph: WorldGraph, path):
    rects = {
        str(lvl): [r.face, r.i0, r.i1, r.j0, r.j1]
        for lvl, r in graph.rects.items()
    }
    payload = {
        "version": 1,
        "levels": list(graph.levels),
        "region": [graph.region.south, graph.region.west,
                   graph.region.north, graph.region.east],
        "rects": rects,
        "node_ids": graph.node_ids,
        "edges": sorted(map(list, graph.edges)),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_world_graph(path) -> WorldGraph:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    s, w, n, e = payload["region"]
    region = BoundingBox(south=s, west=w, north=n, east=e)
    rects = {
        int(lvl): RegionRect(face, int(lvl), i0, i1, j0, j1)
        for lvl, (face, i0, i1, j0, j1) in payload["rects"].items()
    }
    node_ids = payload["node_ids"]
    return WorldGraph(
        node_ids,
        {nid: k for k, nid in enumerate(node_ids)},
        {tuple(e) for e in payload["edges"]},
        tuple(payload["levels"]),
        rects,
        region,
    )
