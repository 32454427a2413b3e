import numpy as np
import pytest

from rvsenv.embedding import (
    EmbeddingTable,
    cosine,
    load_embeddings,
    save_embeddings,
    train_embeddings,
)
from rvsenv.errors import EmptyCorpus
from rvsenv.geo import BoundingBox
from rvsenv.worldgraph import WorldGraph, random_walks

REGION = BoundingBox(south=40.748, west=-73.992, north=40.762, east=-73.975)


def _graph(ids, edges):
    return WorldGraph(
        node_ids=list(ids),
        node_index={nid: k for k, nid in enumerate(ids)},
        edges={tuple(sorted(e)) for e in edges},
        levels=(15, 16, 17),
        rects={},
        region=REGION,
    )


def _clique(offset, size):
    return [(offset + a, offset + b) for a in range(size) for b in range(a + 1, size)]


def test_two_cliques_separate():
    ids = [f"n{k}" for k in range(10)]
    wg = _graph(ids, _clique(0, 5) + _clique(5, 5))
    corpus = random_walks(wg, walks_per_node=40, walk_length=10, seed=0)
    table = train_embeddings(corpus, dim=32, window=4, epochs=3, seed=0)
    vecs = table.vectors
    intra, inter = [], []
    for a in range(10):
        for b in range(a + 1, 10):
            sim = cosine(vecs[a], vecs[b])
            (intra if (a < 5) == (b < 5) else inter).append(sim)
    assert np.mean(intra) > np.mean(inter)


def test_twin_nodes_high_cosine():
    # two leaves with identical neighborhoods (same hub): near-duplicate
    # context distributions must give near-duplicate embeddings
    ids = ["hub", "twin_a", "twin_b", "other1", "other2", "far"]
    edges = [(0, 1), (0, 2), (0, 3), (3, 4), (4, 5)]
    wg = _graph(ids, edges)
    corpus = random_walks(wg, walks_per_node=150, walk_length=12, seed=1)
    table = train_embeddings(corpus, dim=24, window=4, epochs=4, seed=1)
    assert cosine(table["twin_a"], table["twin_b"]) > 0.9


def test_norms_finite_and_nonzero():
    ids = [f"n{k}" for k in range(6)]
    wg = _graph(ids, [(a, a + 1) for a in range(5)])
    corpus = random_walks(wg, walks_per_node=20, walk_length=8, seed=2)
    table = train_embeddings(corpus, dim=16, window=3, epochs=2, seed=2)
    norms = np.linalg.norm(table.vectors, axis=1)
    assert np.isfinite(table.vectors).all()
    assert (norms > 0).all()


def test_training_deterministic():
    ids = [f"n{k}" for k in range(6)]
    wg = _graph(ids, [(a, a + 1) for a in range(5)])
    corpus = random_walks(wg, walks_per_node=10, walk_length=8, seed=3)
    t1 = train_embeddings(corpus, dim=16, window=3, epochs=2, seed=5)
    t2 = train_embeddings(corpus, dim=16, window=3, epochs=2, seed=5)
    t3 = train_embeddings(corpus, dim=16, window=3, epochs=2, seed=6)
    assert t1.vectors.tobytes() == t2.vectors.tobytes()
    assert t1.vectors.tobytes() != t3.vectors.tobytes()


def test_empty_corpus_raises():
    wg = _graph([], [])
    corpus = random_walks(wg, walks_per_node=10, walk_length=8, seed=0)
    with pytest.raises(EmptyCorpus):
        train_embeddings(corpus, dim=8, window=2, epochs=1, seed=0)


def test_save_load_roundtrip(tmp_path):
    table = EmbeddingTable(["a", "b"], np.arange(8, dtype=np.float32).reshape(2, 4))
    path = tmp_path / "emb.npy"
    save_embeddings(table, path, meta={"seed": 3})
    loaded = load_embeddings(path)
    assert loaded.node_ids == ["a", "b"]
    assert (loaded.vectors == table.vectors).all()
