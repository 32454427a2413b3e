"""Discrete location tokens via residual spherical k-means.

Layer 1 clusters the unit-normalized embeddings by cosine distance; layer
2 clusters the renormalized residuals. Each layer owns a disjoint token id
range, so a node's code is a fixed-length token sequence.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import KTooLarge
from .embedding import EmbeddingTable


def _normalize_rows(x):
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


def _kmeans_pp_init(x, k, rng):
    """Seeded k-means++ on cosine distance (points are unit rows)."""
    n = x.shape[0]
    first = int(rng.integers(n))
    chosen = [first]
    dist = np.clip(1.0 - x @ x[first], 0.0, None)
    for _ in range(1, k):
        total = dist.sum()
        if total <= 1e-12:
            # remaining points coincide with chosen centroids: take the
            # lowest-index unchosen point for determinism
            mask = np.ones(n, dtype=bool)
            mask[chosen] = False
            nxt = int(np.nonzero(mask)[0][0])
        else:
            r = rng.random() * total
            nxt = int(np.searchsorted(np.cumsum(dist), r))
            nxt = min(nxt, n - 1)
        chosen.append(nxt)
        dist = np.minimum(dist, np.clip(1.0 - x @ x[nxt], 0.0, None))
    return x[chosen].copy()


def spherical_kmeans(x, k, seed=0, max_iter=50, tol=1e-4):
    """Cosine k-means over unit rows: (assignments, centroids, inertia).

    The returned assignment is the argmax against the returned centroids,
    so it is locally optimal by construction.
    """
    n = x.shape[0]
    if k > n:
        raise KTooLarge(f"k={k} exceeds {n} vectors")
    rng = np.random.default_rng(seed)
    x = _normalize_rows(np.asarray(x, dtype=np.float64))
    centroids = _kmeans_pp_init(x, k, rng)
    prev_inertia = np.inf
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        sims = x @ centroids.T
        assign = np.argmax(sims, axis=1)
        inertia = float(np.sum(1.0 - sims[np.arange(n), assign]))
        # recenter
        new_centroids = np.zeros_like(centroids)
        np.add.at(new_centroids, assign, x)
        norms = np.linalg.norm(new_centroids, axis=1)
        empty = np.nonzero(norms < 1e-12)[0]
        if len(empty) > 0:
            # reseed each empty cluster at the worst-assigned point
            dist = 1.0 - sims[np.arange(n), assign]
            order = np.argsort(-dist)
            for slot, cluster in enumerate(empty):
                new_centroids[cluster] = x[order[slot % n]]
                norms[cluster] = 1.0
        centroids = new_centroids / norms[:, None]
        if prev_inertia - inertia <= tol * max(prev_inertia, 1e-12):
            break
        prev_inertia = inertia
    sims = x @ centroids.T
    assign = np.argmax(sims, axis=1)
    inertia = float(np.sum(1.0 - sims[np.arange(n), assign]))
    return assign, centroids, inertia


class TokenAssignment:
    """Node id -> fixed-length token id sequence; layers own disjoint ids."""

    def __init__(self, node_ids, codes, k, layers):
        self.node_ids = list(node_ids)
        self.codes = codes  # (n, layers) int64
        self.k = k
        self.layers = layers

    def tokens(self, node_id):
        row = self.codes[self.node_ids.index(node_id)]
        return tuple(int(t) for t in row)

    @property
    def vocabulary_size(self):
        return self.k * self.layers

    def as_dict(self):
        return {nid: tuple(map(int, row)) for nid, row in zip(self.node_ids, self.codes)}


def quantize(table: EmbeddingTable, k=150, layers=2, seed=0) -> TokenAssignment:
    """Residual spherical k-means codes for every embedded node."""
    x = np.asarray(table.vectors, dtype=np.float64)
    if k > x.shape[0]:
        raise KTooLarge(f"k={k} exceeds {x.shape[0]} nodes")
    codes = np.zeros((x.shape[0], layers), dtype=np.int64)
    current = _normalize_rows(x)
    for layer in range(layers):
        assign, centroids, _ = spherical_kmeans(current, k, seed=seed + layer)
        codes[:, layer] = assign + layer * k
        current = _normalize_rows(current - centroids[assign])
    return TokenAssignment(table.node_ids, codes, k, layers)


def save_tokens(assignment: TokenAssignment, path):
    """JSON-lines {node_id, tokens:[...]} in node order."""
    with open(path, "w", encoding="utf-8") as fh:
        for nid, row in zip(assignment.node_ids, assignment.codes):
            fh.write(json.dumps(
                {"node_id": nid, "tokens": [int(t) for t in row]},
                sort_keys=True) + "\n")


def load_tokens(path, k=None) -> TokenAssignment:
    """Load a token file; pass `k` (from the artifact sidecar) when known,
    otherwise it is inferred from the layer-1 id range."""
    node_ids, rows = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            node_ids.append(rec["node_id"])
            rows.append(rec["tokens"])
    codes = np.asarray(rows, dtype=np.int64)
    layers = codes.shape[1] if len(rows) else 0
    if k is None:
        k = int(codes[:, 0].max()) + 1 if len(rows) else 0
    return TokenAssignment(node_ids, codes, k, layers)
