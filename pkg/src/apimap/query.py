"""Cross-space nearest-neighbor queries over an aligned pair of embedding spaces.

A query maps a source vector through W and ranks target tokens by cosine
similarity with an exact scan. Target vectors are pre-normalized once per
space, so ranking reduces to a dot product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddingSpace
from .seeding import MappingMatrix


@dataclass(frozen=True)
class QueryResult:
    """Ranked neighbors for one query token.

    ``neighbors`` holds up to k (target_token, cosine) pairs with similarities
    non-increasing. ``oov`` marks source tokens absent from the vocabulary.
    """

    query_token: str
    neighbors: tuple[tuple[str, float], ...] = ()
    oov: bool = False

    def __post_init__(self) -> None:
        sims = [s for _, s in self.neighbors]
        if any(sims[i] < sims[i + 1] for i in range(len(sims) - 1)):
            raise ValueError("similarities must be non-increasing")
        tokens = [t for t, _ in self.neighbors]
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate target token in result")

    @property
    def tokens(self) -> list[str]:
        return [t for t, _ in self.neighbors]


def map_vector(w: MappingMatrix | np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply the mapping: returns W x."""
    m = w.w if isinstance(w, MappingMatrix) else np.asarray(w)
    x = np.asarray(x)
    if m.ndim != 2 or x.shape != (m.shape[1],):
        raise ValueError(f"dimension mismatch: W is {m.shape}, x is {x.shape}")
    return m @ x


def nearest_neighbors(
    v: np.ndarray,
    tgt: EmbeddingSpace,
    k: int,
    threshold: float | None = None,
    query_token: str = "",
) -> QueryResult:
    """Exact top-k target tokens by cosine similarity to v.

    Ties are broken by vocabulary index. With a threshold, neighbors below it
    are filtered out and the result may be empty. A zero query vector has no
    defined cosine and raises ValueError.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("undefined cosine for zero query vector")
    sims = tgt.unit_vectors @ (v / norm)
    # stable sort on descending similarity keeps vocabulary order within ties
    order = np.argsort(-sims, kind="stable")[:k]
    neighbors = [
        (tgt.vocab.tokens[i], float(sims[i]))
        for i in order
        if threshold is None or sims[i] >= threshold
    ]
    return QueryResult(query_token, tuple(neighbors))


def batch_query(
    tokens: list[str],
    w: MappingMatrix,
    src: EmbeddingSpace,
    tgt: EmbeddingSpace,
    k: int,
    threshold: float | None = None,
) -> list[QueryResult]:
    """Query each token; unknown source tokens yield an oov-marked result."""
    results: list[QueryResult] = []
    for token in tokens:
        if token not in src:
            results.append(QueryResult(token, (), oov=True))
            continue
        mapped = map_vector(w, src.vector(token))
        results.append(nearest_neighbors(mapped, tgt, k, threshold, query_token=token))
    return results
