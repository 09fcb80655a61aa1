"""Hyperparameter sweeps: k per metric, threshold scan, alpha/beta scans and
joint grids, and best-configuration selection on validation error.

Every sweep is a pure function of (dataset, split, grid): configurations are
evaluated independently, results are gathered in grid order rather than
completion order, and neighbor orderings are shared across k values of the
same configuration (the first k columns of a stable ordering are the k
nearest neighbors for every k). Selection always uses the validation mean;
test data is out of reach by construction and guarded besides.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .dataset import FingerprintSet, SplitIndices
from .errors import InputError, RFFingerprintError
from .estimator import neighbor_order
from .evaluate import (
    ErrorStats,
    EvalConfig,
    GeodesicKind,
    error_stats,
    geodesic_errors,
    sweep_scope,
)
from .transform import RepresentationKind, TransformParams, transform_set
from .vecmetric import MetricKind


class EmptyResults(RFFingerprintError):
    pass


@dataclass(frozen=True)
class SweepResult:
    """One evaluated configuration and its validation error statistics."""

    cfg: EvalConfig
    validation: ErrorStats


def _beta_default_values() -> tuple[float, ...]:
    # [2.00, 3.00] in 0.02 steps, plus the conventional default beta = e so
    # the default-beta point is part of every scan curve.
    values = [(200 + 2 * i) / 100.0 for i in range(51)]
    values.append(math.e)
    return tuple(sorted(values))


DEFAULT_K_VALUES = tuple(range(1, 21))
DEFAULT_TAU_VALUES = tuple(float(t) for t in range(-200, -129))
DEFAULT_ALPHA_VALUES = tuple(float(a) for a in range(10, 41))
DEFAULT_BETA_VALUES = _beta_default_values()


@dataclass(frozen=True)
class SweepGrid:
    """Grid bundle used by the CLI; the sweep functions take explicit ranges."""

    metrics: tuple[MetricKind, ...] = tuple(MetricKind)
    representations: tuple[RepresentationKind, ...] = (
        RepresentationKind.EXPONENTIAL,
        RepresentationKind.POWED,
    )
    k_values: tuple[int, ...] = DEFAULT_K_VALUES
    tau_values: tuple[float, ...] = DEFAULT_TAU_VALUES
    alpha_values: tuple[float, ...] = DEFAULT_ALPHA_VALUES
    beta_values: tuple[float, ...] = DEFAULT_BETA_VALUES

    def __post_init__(self):
        for name in (
            "metrics",
            "representations",
            "k_values",
            "tau_values",
            "alpha_values",
            "beta_values",
        ):
            if len(getattr(self, name)) == 0:
                raise InputError(f"sweep grid has an empty {name} range")


@dataclass(frozen=True)
class ScanOutcome:
    """Results of one sweep in grid order, plus the winning row."""

    axis: str
    results: tuple[SweepResult, ...]
    best: SweepResult


@dataclass(frozen=True)
class KMetricOutcome(ScanOutcome):
    """k-per-metric table plus the best row of every (metric, representation)."""

    best_by_cell: dict = field(default_factory=dict)


def _check_k_values(ks, split: SplitIndices) -> tuple[int, ...]:
    ks = tuple(int(k) for k in ks)
    if not ks:
        raise InputError("empty k range")
    n_train = split.train.size
    if min(ks) < 1 or max(ks) > n_train:
        raise InputError(
            f"k range [{min(ks)}, {max(ks)}] outside [1, {n_train}] training rows"
        )
    return ks


def _k_curve(
    fps: FingerprintSet,
    split: SplitIndices,
    params: TransformParams,
    metric: MetricKind,
    ks: tuple[int, ...],
    geodesic: GeodesicKind,
) -> list[SweepResult]:
    """Validation stats for every k of one (params, metric) configuration.

    Computes the transform and the neighbor ordering once; each k then reuses
    the ordering prefix, which is exactly what a standalone evaluation of
    that k would select.
    """
    reference = transform_set(fps, split.train, params)
    queries = transform_set(fps, split.validation, params)
    positions = fps.positions_rows(split.train)
    truth = fps.positions_rows(split.validation)
    order = neighbor_order(reference.values, queries.values, metric, max(ks))
    out = []
    for k in ks:
        predicted = positions[order[:, :k]].mean(axis=1)
        stats = error_stats(geodesic_errors(predicted, truth, geodesic))
        out.append(SweepResult(EvalConfig(params, metric, k, geodesic), stats))
    return out


def _run_units(units, worker, jobs: int) -> list:
    if jobs <= 1:
        return [worker(unit) for unit in units]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, units))


def _best_result(results) -> SweepResult:
    results = list(results)
    if not results:
        raise EmptyResults("no sweep results to select from")
    return min(
        results,
        key=lambda r: (r.validation.mean_m, r.cfg.k, r.cfg.metric.value),
    )


def select_best(results) -> EvalConfig:
    """Configuration with the lowest validation mean error.

    Ties break toward smaller k, then lexicographic metric name. Only
    validation statistics are consulted.
    """
    return _best_result(results).cfg


def sweep_k_by_metric(
    fps: FingerprintSet,
    split: SplitIndices,
    representations,
    tau: float,
    k_values=DEFAULT_K_VALUES,
    *,
    metrics=tuple(MetricKind),
    alpha: float = 24.0,
    beta: float = math.e,
    geodesic: GeodesicKind = GeodesicKind.HAVERSINE,
    jobs: int = 1,
) -> KMetricOutcome:
    """Evaluate every (metric, representation, k) cell at a fixed threshold.

    Reproduces the k-per-metric tables: the best k of each (metric,
    representation) cell is the argmin of the validation mean error, ties to
    the smaller k.
    """
    ks = _check_k_values(k_values, split)
    representations = tuple(representations)
    metrics = tuple(metrics)
    units = [(metric, rep) for metric in metrics for rep in representations]

    def worker(unit):
        metric, rep = unit
        params = TransformParams(kind=rep, tau=tau, alpha=alpha, beta=beta)
        return _k_curve(fps, split, params, metric, ks, geodesic)

    with sweep_scope():
        curves = _run_units(units, worker, jobs)
    results = tuple(result for curve in curves for result in curve)
    best_by_cell = {
        unit: _best_result(curve) for unit, curve in zip(units, curves)
    }
    return KMetricOutcome(
        axis="k-metric",
        results=results,
        best=_best_result(results),
        best_by_cell=best_by_cell,
    )


def sweep_tau(
    fps: FingerprintSet,
    split: SplitIndices,
    base: EvalConfig,
    tau_values=DEFAULT_TAU_VALUES,
    *,
    jobs: int = 1,
) -> ScanOutcome:
    """Scan the detection threshold with everything else fixed.

    The threshold is the free variable (clamp plus denominator); the training
    floor is not recomputed per point. The curve is emitted at every grid
    value for plotting.
    """
    taus = tuple(float(t) for t in tau_values)
    if not taus:
        raise InputError("empty tau range")
    _check_k_values([base.k], split)

    def worker(tau):
        params = replace(base.params, tau=tau)
        return _k_curve(fps, split, params, base.metric, (base.k,), base.geodesic)

    with sweep_scope():
        curves = _run_units(taus, worker, jobs)
    results = tuple(result for curve in curves for result in curve)
    return ScanOutcome(axis="tau", results=results, best=_best_result(results))


def _sweep_shape_param(
    fps: FingerprintSet,
    split: SplitIndices,
    base: EvalConfig,
    axis: str,
    values,
    k_values,
    jobs: int,
) -> ScanOutcome:
    values = tuple(float(v) for v in values)
    if not values:
        raise InputError(f"empty {axis} range")
    ks = _check_k_values(k_values if k_values is not None else [base.k], split)

    def worker(value):
        params = replace(base.params, **{axis: value})
        return _k_curve(fps, split, params, base.metric, ks, base.geodesic)

    with sweep_scope():
        curves = _run_units(values, worker, jobs)
    results = tuple(result for curve in curves for result in curve)
    out_axis = axis if k_values is None else f"{axis}-k"
    return ScanOutcome(axis=out_axis, results=results, best=_best_result(results))


def sweep_alpha(
    fps: FingerprintSet,
    split: SplitIndices,
    base: EvalConfig,
    alpha_values=DEFAULT_ALPHA_VALUES,
    k_values=None,
    *,
    jobs: int = 1,
) -> ScanOutcome:
    """Scan the exponential shape parameter; optionally jointly with k."""
    if base.params.kind is not RepresentationKind.EXPONENTIAL:
        raise InputError("alpha sweep requires the exponential representation")
    return _sweep_shape_param(fps, split, base, "alpha", alpha_values, k_values, jobs)


def sweep_beta(
    fps: FingerprintSet,
    split: SplitIndices,
    base: EvalConfig,
    beta_values=DEFAULT_BETA_VALUES,
    k_values=None,
    *,
    jobs: int = 1,
) -> ScanOutcome:
    """Scan the powed exponent; optionally jointly with k."""
    if base.params.kind is not RepresentationKind.POWED:
        raise InputError("beta sweep requires the powed representation")
    return _sweep_shape_param(fps, split, base, "beta", beta_values, k_values, jobs)
