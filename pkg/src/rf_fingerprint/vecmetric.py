"""Vector distance metrics between transformed fingerprints.

Six metrics over nonnegative real vectors. Scalar and matrix entry points
share one kernel (scipy's cdist), so a pair distance and the corresponding
pairwise-matrix entry are bit-identical. Conventions on degenerate inputs:
Canberra terms with u_i = v_i = 0 contribute 0, and Bray-Curtis of two
all-zero vectors is 0 (identical vectors must be at distance 0).
"""

from __future__ import annotations

import enum

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InputError


class MetricKind(enum.Enum):
    EUCLIDEAN = "euclidean"
    MANHATTAN = "manhattan"
    CHEBYSHEV = "chebyshev"
    HAMMING = "hamming"
    CANBERRA = "canberra"
    BRAYCURTIS = "braycurtis"


class DimensionMismatch(InputError):
    pass


_CDIST_NAME = {
    MetricKind.EUCLIDEAN: "euclidean",
    MetricKind.MANHATTAN: "cityblock",
    MetricKind.CHEBYSHEV: "chebyshev",
    MetricKind.HAMMING: "hamming",
    MetricKind.CANBERRA: "canberra",
    MetricKind.BRAYCURTIS: "braycurtis",
}
assert set(_CDIST_NAME) == set(MetricKind), "metric dispatch table incomplete"


def pairwise_distance(u: np.ndarray, v: np.ndarray, kind: MetricKind) -> np.ndarray:
    """Distance matrix between the rows of u (m x B) and v (n x B)."""
    u = np.ascontiguousarray(u, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    if u.ndim != 2 or v.ndim != 2:
        raise DimensionMismatch(f"expected 2-D inputs, got {u.ndim}-D and {v.ndim}-D")
    if u.shape[1] != v.shape[1] or u.shape[1] == 0:
        raise DimensionMismatch(
            f"incompatible vector lengths: {u.shape[1]} vs {v.shape[1]}"
        )
    out = cdist(u, v, _CDIST_NAME[kind])
    if kind is MetricKind.BRAYCURTIS:
        # 0/0 from two all-zero vectors; identical vectors are at distance 0
        np.nan_to_num(out, copy=False, nan=0.0)
    return out


def distance(u: np.ndarray, v: np.ndarray, kind: MetricKind) -> float:
    """Distance between two vectors of equal length."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.ndim != 1 or v.ndim != 1:
        raise DimensionMismatch(f"expected 1-D vectors, got {u.ndim}-D and {v.ndim}-D")
    return float(pairwise_distance(u[np.newaxis, :], v[np.newaxis, :], kind)[0, 0])
