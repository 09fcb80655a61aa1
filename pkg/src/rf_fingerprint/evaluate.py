"""End-to-end evaluation of one configuration under the train/validation/test
protocol.

One evaluation transforms the training and target rows with identical
parameters, fits a kNN model on training rows only, predicts every target
row, and aggregates the geodesic errors. The test set is reserved for the
final, post-tuning measurement: evaluating against it inside a running sweep
raises :class:`ProtocolViolation`, and CLI surfaces additionally require an
explicit flag.
"""

from __future__ import annotations

import enum
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .dataset import FingerprintSet, SplitIndices, Subset
from .errors import RFFingerprintError
from .estimator import KnnModel, predict_coords
from .geo import haversine_m, vincenty_m
from .transform import TransformParams, transform_set
from .vecmetric import MetricKind


class GeodesicKind(enum.Enum):
    HAVERSINE = "haversine"
    VINCENTY = "vincenty"


class ProtocolViolation(RFFingerprintError):
    """Attempted test-set evaluation while hyperparameter tuning is running."""


class EmptyErrors(RFFingerprintError):
    pass


@dataclass(frozen=True)
class EvalConfig:
    """Everything one evaluation needs: representation, metric, k, geodesic."""

    params: TransformParams
    metric: MetricKind
    k: int
    geodesic: GeodesicKind = GeodesicKind.HAVERSINE


@dataclass(frozen=True)
class ErrorStats:
    """Aggregated geodesic prediction errors, in meters."""

    n: int
    mean_m: float
    median_m: float
    p75_m: float
    p90_m: float
    max_m: float


def error_stats(errors) -> ErrorStats:
    """Aggregate a sequence of error distances.

    Median of an even-length sample is the average of the two central order
    statistics; p75/p90 use the nearest-rank definition (value at rank
    ceil(q * n), 1-based).
    """
    errors = np.asarray(errors, dtype=np.float64)
    if errors.size == 0:
        raise EmptyErrors("cannot aggregate an empty error sequence")
    ordered = np.sort(errors)
    n = ordered.size

    def nearest_rank(q: float) -> float:
        return float(ordered[int(np.ceil(q * n)) - 1])

    if n % 2 == 0:
        median = (float(ordered[n // 2 - 1]) + float(ordered[n // 2])) / 2.0
    else:
        median = float(ordered[n // 2])
    return ErrorStats(
        n=int(n),
        mean_m=float(errors.mean()),
        median_m=median,
        p75_m=nearest_rank(0.75),
        p90_m=nearest_rank(0.90),
        max_m=float(ordered[-1]),
    )


def geodesic_errors(
    predicted: np.ndarray, truth: np.ndarray, kind: GeodesicKind
) -> np.ndarray:
    """Per-row geodesic distance in meters between predicted and true (lat, lon)."""
    if kind is GeodesicKind.HAVERSINE:
        return np.atleast_1d(
            haversine_m(predicted[:, 0], predicted[:, 1], truth[:, 0], truth[:, 1])
        )
    if kind is GeodesicKind.VINCENTY:
        return vincenty_m(predicted[:, 0], predicted[:, 1], truth[:, 0], truth[:, 1])
    raise ValueError(f"unknown geodesic kind: {kind!r}")


# Depth counter rather than a boolean so nested sweeps stay guarded. Sweeps
# enter the scope on the orchestrating thread before fanning out workers.
_SWEEP_DEPTH = 0


@contextmanager
def sweep_scope():
    """Marks a region as hyperparameter tuning; test-set evaluation refuses
    to run inside it."""
    global _SWEEP_DEPTH
    _SWEEP_DEPTH += 1
    try:
        yield
    finally:
        _SWEEP_DEPTH -= 1


def in_sweep() -> bool:
    return _SWEEP_DEPTH > 0


def fit_model(fps: FingerprintSet, split: SplitIndices, cfg: EvalConfig) -> KnnModel:
    """Transform the training rows and build the kNN model.

    Reads training rows only; the access-log instrumentation of
    :class:`FingerprintSet` can prove it.
    """
    reference = transform_set(fps, split.train, cfg.params)
    positions = fps.positions_rows(split.train)
    return KnnModel(reference=reference, positions=positions, metric=cfg.metric, k=cfg.k)


def evaluate(
    fps: FingerprintSet, split: SplitIndices, cfg: EvalConfig, target: Subset
) -> ErrorStats:
    """Fit on the training rows, score every row of `target`.

    `target` must be VALIDATION or TEST: the training set has no held-out
    meaning. Test-set evaluation is the final measurement and refuses to run
    while a sweep is in progress.
    """
    if target not in (Subset.VALIDATION, Subset.TEST):
        raise ValueError(f"evaluation target must be validation or test, got {target}")
    if target is Subset.TEST and in_sweep():
        raise ProtocolViolation(
            "test-set evaluation inside a hyperparameter sweep; finish tuning "
            "first, then run the final test evaluation explicitly"
        )
    model = fit_model(fps, split, cfg)
    rows = split.subset(target)
    queries = transform_set(fps, rows, cfg.params)
    predicted = predict_coords(model, queries.values)
    truth = fps.positions_rows(rows)
    return error_stats(geodesic_errors(predicted, truth, cfg.geodesic))


RESULT_COLUMNS = (
    "metric",
    "representation",
    "tau",
    "alpha",
    "beta",
    "k",
    "target",
    "n",
    "mean_m",
    "median_m",
    "p75_m",
    "p90_m",
    "max_m",
)


def result_row(cfg: EvalConfig, target: Subset, errstats: ErrorStats) -> dict:
    """One serialized result: config columns plus fixed-precision statistics.

    Meters carry one decimal so text outputs are stable for golden-file
    comparison; the test target is tagged FINAL to stand out in reports.
    """
    return {
        "metric": cfg.metric.value,
        "representation": cfg.params.kind.value,
        "tau": f"{cfg.params.tau:g}",
        "alpha": f"{cfg.params.alpha:g}",
        "beta": f"{cfg.params.beta:g}",
        "k": str(cfg.k),
        "target": "test[FINAL]" if target is Subset.TEST else target.value,
        "n": str(errstats.n),
        "mean_m": f"{errstats.mean_m:.1f}",
        "median_m": f"{errstats.median_m:.1f}",
        "p75_m": f"{errstats.p75_m:.1f}",
        "p90_m": f"{errstats.p90_m:.1f}",
        "max_m": f"{errstats.max_m:.1f}",
    }
