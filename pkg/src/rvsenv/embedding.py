"""Skip-gram negative-sampling embeddings over walk corpora.

A compact vectorized trainer: per optimizer step it consumes the pairs of
a few walks (the paper-reported word batch), samples negatives from the
unigram^0.75 table, and applies accumulated gradients with unbuffered
scatter-adds. Single stream, fixed iteration order: byte-deterministic
for a given seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyCorpus


@dataclass
class EmbeddingTable:
    node_ids: list
    vectors: np.ndarray  # (n, dim) float32

    def __getitem__(self, node_id):
        return self.vectors[self.node_ids.index(node_id)]

    @property
    def dim(self):
        return int(self.vectors.shape[1])


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30.0, 30.0)))


def train_embeddings(corpus, dim=1024, window=10, epochs=5, seed=0,
                     negative=5, alpha=0.5, min_alpha=1e-3,
                     batch_walks=4) -> EmbeddingTable:
    """Train node embeddings on a walk corpus.

    `batch_walks` walks form one optimizer step with mean-reduced
    gradients (repeated rows within a step would otherwise compound);
    negatives come from the corpus unigram distribution raised to 0.75.
    """
    if corpus.num_walks == 0 or corpus.num_nodes == 0:
        raise EmptyCorpus("walk corpus is empty")
    n = corpus.num_nodes
    rng = np.random.default_rng(seed)

    # unigram counts over one full pass
    counts = np.zeros(n, dtype=np.int64)
    total_tokens = 0
    for batch in corpus.batches():
        flat = batch[batch >= 0]
        counts += np.bincount(flat, minlength=n)
        total_tokens += flat.size
    if total_tokens == 0:
        raise EmptyCorpus("walk corpus has no tokens")
    noise = counts.astype(np.float64) ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())

    w_in = ((rng.random((n, dim), dtype=np.float32) - 0.5) / dim).astype(np.float32)
    w_out = np.zeros((n, dim), dtype=np.float32)

    total_steps = max(1, epochs * ((corpus.num_walks + batch_walks - 1) // batch_walks))
    step = 0
    for _ in range(epochs):
        for batch in corpus.batches():
            for lo in range(0, len(batch), batch_walks):
                chunk = batch[lo:lo + batch_walks]
                centers, contexts = _pairs(chunk, window, rng)
                step += 1
                if len(centers) == 0:
                    continue
                lr = alpha + (min_alpha - alpha) * min(1.0, step / total_steps)
                negs = np.searchsorted(
                    noise_cdf, rng.random((len(centers), negative))
                ).astype(np.int64)
                targets = np.concatenate([contexts[:, None], negs], axis=1)
                h = w_in[centers]                      # (m, d)
                out = w_out[targets]                   # (m, 1+k, d)
                scores = np.einsum("md,mjd->mj", h, out)
                labels = np.zeros_like(scores)
                labels[:, 0] = 1.0
                g = (labels - _sigmoid(scores)) * (lr / len(centers))
                grad_h = np.einsum("mj,mjd->md", g, out)
                grad_out = g[:, :, None] * h[:, None, :]
                np.add.at(w_in, centers, grad_h.astype(np.float32))
                np.add.at(w_out, targets.reshape(-1),
                          grad_out.reshape(-1, dim).astype(np.float32))
    return EmbeddingTable(list(corpus.node_ids), w_in)


def _pairs(walks, window, rng):
    """(center, context) index pairs with the word2vec reduced window."""
    centers, contexts = [], []
    reduced = rng.integers(1, window + 1, size=walks.shape)
    for row in range(walks.shape[0]):
        walk = walks[row]
        length = int(np.argmax(walk < 0)) if (walk < 0).any() else len(walk)
        for pos in range(length):
            b = int(reduced[row, pos])
            lo, hi = max(0, pos - b), min(length, pos + b + 1)
            for ctx in range(lo, hi):
                if ctx != pos:
                    centers.append(walk[pos])
                    contexts.append(walk[ctx])
    if not centers:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.asarray(centers, dtype=np.int64), np.asarray(contexts, dtype=np.int64)


def cosine(a, b):
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def save_embeddings(table: EmbeddingTable, path, meta=None):
    """Binary matrix (.npy) plus JSON sidecar with node order and settings."""
    np.save(path, table.vectors)
    sidecar = {"node_ids": table.node_ids, "dim": table.dim}
    if meta:
        sidecar.update(meta)
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True)


def load_embeddings(path) -> EmbeddingTable:
    vectors = np.load(str(path) if str(path).endswith(".npy") else str(path))
    with open(str(path) + ".json", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    return EmbeddingTable(sidecar["node_ids"], vectors)
