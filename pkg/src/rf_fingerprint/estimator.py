"""kNN position estimation over transformed fingerprints.

Neighbor search is exact brute force: at the scale this package targets
(about 10k training rows of 84 basestations) an exhaustive distance matrix is
cheap, and bit-exact reproducibility matters more than speed. Ties at equal
distance are broken toward the smaller training-row index via a stable sort,
so runs are deterministic regardless of batching or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geo import GeoPoint
from .transform import TransformedMatrix
from .vecmetric import DimensionMismatch, MetricKind, pairwise_distance

# Queries are processed in row blocks so the full m x n distance matrix is
# never materialized; block size only bounds memory, never changes results.
_QUERY_BLOCK_ROWS = 512


@dataclass(frozen=True)
class KnnModel:
    """Immutable kNN model: reference features, their positions, metric, k."""

    reference: TransformedMatrix
    positions: np.ndarray  # (n_train, 2) latitude/longitude in degrees
    metric: MetricKind
    k: int

    def __post_init__(self):
        n = self.reference.values.shape[0]
        if self.positions.shape != (n, 2):
            raise DimensionMismatch(
                f"positions shape {self.positions.shape} does not match "
                f"{n} reference rows"
            )
        if not 1 <= self.k <= n:
            raise ValueError(f"k must be in [1, {n}], got {self.k}")


def neighbor_order(
    reference: np.ndarray, queries: np.ndarray, kind: MetricKind, kmax: int
) -> np.ndarray:
    """Indices of the kmax nearest reference rows per query row, (m, kmax).

    Column j holds the j-th nearest neighbor; equal distances rank by
    ascending reference index (stable sort). The result for any k <= kmax is
    the first k columns, which lets hyperparameter sweeps reuse one ordering
    across all k values.
    """
    reference = np.asarray(reference, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    n = reference.shape[0]
    if not 1 <= kmax <= n:
        raise ValueError(f"kmax must be in [1, {n}], got {kmax}")
    m = queries.shape[0]
    out = np.empty((m, kmax), dtype=np.int64)
    for start in range(0, m, _QUERY_BLOCK_ROWS):
        block = queries[start : start + _QUERY_BLOCK_ROWS]
        dists = pairwise_distance(block, reference, kind)
        out[start : start + block.shape[0]] = np.argsort(
            dists, axis=1, kind="stable"
        )[:, :kmax]
    return out


def predict_coords(model: KnnModel, queries: np.ndarray) -> np.ndarray:
    """Predicted (lat, lon) per query row: unweighted mean of the k nearest."""
    order = neighbor_order(model.reference.values, queries, model.metric, model.k)
    return model.positions[order].mean(axis=1)


def predict(model: KnnModel, query: np.ndarray) -> GeoPoint:
    """Predict the position of a single transformed fingerprint vector."""
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D query vector, got {query.ndim}-D")
    coords = predict_coords(model, query[np.newaxis, :])
    return GeoPoint(float(coords[0, 0]), float(coords[0, 1]))


def predict_batch(model: KnnModel, queries: TransformedMatrix) -> list[GeoPoint]:
    """Predict every row of a transformed query matrix, preserving order.

    The queries must have been transformed with the same parameters as the
    model's reference matrix; mixing representations would compare
    incommensurable feature spaces.
    """
    if queries.params != model.reference.params:
        raise ValueError(
            "query matrix was transformed with different parameters than the model"
        )
    coords = predict_coords(model, queries.values)
    return [GeoPoint(float(lat), float(lon)) for lat, lon in coords]
