"""Outdoor RSSI-fingerprint localization over LPWAN fingerprint datasets.

Library layout mirrors the pipeline: `dataset` (ingestion, splits,
statistics), `transform` (RSSI representations), `vecmetric` (distances in
feature space), `estimator` (kNN), `geo` (geodesic error), `evaluate`
(protocol-safe scoring), `sweep` (hyperparameter tuning), `report`
(CSV/figures/markdown), `cli` (the `rf-fingerprint` command).
"""

from .dataset import (
    CsvSchema,
    DatasetStats,
    FingerprintSet,
    SplitIndices,
    Subset,
    load_fingerprints,
    load_split,
    make_split,
    save_fingerprints,
    save_split,
    stats,
    training_floor,
)
from .errors import InputError, RFFingerprintError
from .estimator import KnnModel, predict, predict_batch
from .evaluate import (
    ErrorStats,
    EvalConfig,
    GeodesicKind,
    ProtocolViolation,
    error_stats,
    evaluate,
    fit_model,
)
from .geo import GeoPoint, VincentyNonConvergence, haversine_distance, vincenty_distance
from .sweep import (
    SweepGrid,
    SweepResult,
    select_best,
    sweep_alpha,
    sweep_beta,
    sweep_k_by_metric,
    sweep_tau,
)
from .transform import RepresentationKind, TransformedMatrix, TransformParams, transform_set
from .vecmetric import MetricKind, distance

__version__ = "0.1.0"

__all__ = [
    "CsvSchema",
    "DatasetStats",
    "ErrorStats",
    "EvalConfig",
    "FingerprintSet",
    "GeoPoint",
    "GeodesicKind",
    "InputError",
    "KnnModel",
    "MetricKind",
    "ProtocolViolation",
    "RFFingerprintError",
    "RepresentationKind",
    "SplitIndices",
    "Subset",
    "SweepGrid",
    "SweepResult",
    "TransformParams",
    "TransformedMatrix",
    "VincentyNonConvergence",
    "distance",
    "error_stats",
    "evaluate",
    "fit_model",
    "haversine_distance",
    "load_fingerprints",
    "load_split",
    "make_split",
    "predict",
    "predict_batch",
    "save_fingerprints",
    "save_split",
    "select_best",
    "stats",
    "sweep_alpha",
    "sweep_beta",
    "sweep_k_by_metric",
    "sweep_tau",
    "training_floor",
    "transform_set",
    "vincenty_distance",
]
