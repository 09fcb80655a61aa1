"""Acceptance suite.

Criteria 1-8 reproduce the published study and need the public Antwerp
Sigfox dataset plus its train/validation/test split (see README: download
them from the DOIs printed by `rf-fingerprint fetch`, point RFF_DATA_DIR at
them). They skip, with instructions, when the data is not mounted.

Criteria 9-14 are dataset-independent property checks on synthetic fixtures
and always run. A per-criterion PASS/FAIL/SKIP line is printed in the
terminal summary (see conftest).
"""

import math
import warnings

import numpy as np
import pytest

from rf_fingerprint.cli import main as cli_main
from rf_fingerprint.dataset import (
    Subset,
    load_split,
    make_split,
    save_fingerprints,
    save_split,
    training_floor,
)
from rf_fingerprint.errors import InputError
from rf_fingerprint.estimator import KnnModel, predict, predict_coords
from rf_fingerprint.evaluate import (
    EvalConfig,
    GeodesicKind,
    error_stats,
    evaluate,
    fit_model,
    geodesic_errors,
)
from rf_fingerprint.sweep import (
    sweep_alpha,
    sweep_beta,
    sweep_k_by_metric,
    sweep_tau,
)
from rf_fingerprint.transform import (
    RepresentationKind,
    TransformParams,
    TransformedMatrix,
    exponential,
    normalized,
    powed,
    transform_set,
)
from rf_fingerprint.vecmetric import MetricKind, distance, pairwise_distance

from conftest import synth_set

E = math.e
EXPO = RepresentationKind.EXPONENTIAL
POWED = RepresentationKind.POWED
BC = MetricKind.BRAYCURTIS


def within(value: float, target: float, rel: float) -> bool:
    return abs(value - target) <= rel * target


# --- shared expensive sweeps (dataset-dependent) ------------------------------


@pytest.fixture(scope="session")
def table1(antwerp):
    return sweep_k_by_metric(
        antwerp.fps,
        antwerp.split,
        [EXPO, POWED],
        tau=-200.0,
        jobs=antwerp.jobs,
    )


@pytest.fixture(scope="session")
def table2(antwerp):
    return sweep_k_by_metric(
        antwerp.fps,
        antwerp.split,
        [EXPO, POWED],
        tau=-157.0,
        jobs=antwerp.jobs,
    )


@pytest.fixture(scope="session")
def best_cfg_table2(table2):
    return table2.best.cfg


# --- dataset-dependent criteria ------------------------------------------------


@pytest.mark.criterion(1, "ingestion: counts, received values, minimum RSSI")
def test_criterion_1_ingestion(antwerp):
    fps = antwerp.fps
    assert fps.n_messages == 14378
    assert fps.n_basestations == 84
    received = fps.rssi[fps.rssi != fps.sentinel]
    assert received.size == 317126
    assert received.min() == -156.0
    if not antwerp.generated_split:
        split = antwerp.split
        assert split.validation.size == 2157
        assert split.test.size == 2157
        assert split.n_total == 14378


@pytest.mark.criterion(2, "k-metric table at the out-of-range default threshold")
def test_criterion_2_table1(antwerp, table1):
    best = table1.best
    assert best.cfg.metric is BC
    assert best.cfg.params.kind is EXPO
    assert within(best.validation.mean_m, 344.0, 0.03)
    assert within(best.validation.median_m, 148.0, 0.05)
    # published best k of the braycurtis rows, within +/- 2
    assert abs(table1.best_by_cell[(BC, EXPO)].cfg.k - 8) <= 2
    assert abs(table1.best_by_cell[(BC, POWED)].cfg.k - 6) <= 2


@pytest.mark.criterion(3, "k-metric table at the adjusted threshold, plus final test")
def test_criterion_3_table2(antwerp, table2, best_cfg_table2):
    floor = training_floor(antwerp.fps, antwerp.split)
    if antwerp.generated_split:
        assert -157.0 <= floor <= -150.0
    else:
        assert floor == -157.0
    best = table2.best
    assert best.cfg.metric is BC
    assert best.cfg.params.kind is POWED
    assert best.cfg.k == 6
    assert within(best.validation.mean_m, 319.0, 0.03)
    assert within(best.validation.median_m, 123.0, 0.05)
    final = evaluate(antwerp.fps, antwerp.split, best_cfg_table2, Subset.TEST)
    assert within(final.mean_m, 301.0, 0.03)
    assert within(final.median_m, 109.0, 0.05)


@pytest.mark.criterion(4, "threshold scan: argmin location, minimum, final test")
def test_criterion_4_tau_scan(antwerp):
    base = EvalConfig(
        params=TransformParams(POWED, tau=-157.0), metric=BC, k=6
    )
    outcome = sweep_tau(antwerp.fps, antwerp.split, base, jobs=antwerp.jobs)
    assert -161.0 <= outcome.best.cfg.params.tau <= -157.0
    assert within(outcome.best.validation.mean_m, 317.0, 0.03)
    # consistency: the -157 point of the curve is the table-2 best cell
    point = next(r for r in outcome.results if r.cfg.params.tau == -157.0)
    assert within(point.validation.mean_m, 319.0, 0.03)
    final = evaluate(antwerp.fps, antwerp.split, outcome.best.cfg, Subset.TEST)
    assert within(final.mean_m, 298.0, 0.03)
    assert within(final.median_m, 109.0, 0.05)


@pytest.mark.criterion(5, "exponential shape scan and joint (alpha, k) grid")
def test_criterion_5_alpha_scan(antwerp):
    base = EvalConfig(
        params=TransformParams(EXPO, tau=-157.0), metric=BC, k=5
    )
    scan = sweep_alpha(antwerp.fps, antwerp.split, base, jobs=antwerp.jobs)
    assert 17.0 <= scan.best.cfg.params.alpha <= 21.0
    assert within(scan.best.validation.mean_m, 339.0, 0.03)
    grid = sweep_alpha(
        antwerp.fps,
        antwerp.split,
        base,
        k_values=tuple(range(1, 21)),
        jobs=antwerp.jobs,
    )
    assert within(grid.best.validation.mean_m, 336.0, 0.03)


@pytest.mark.criterion(6, "powed exponent scan: argmin, minimum, default-beta point")
def test_criterion_6_beta_scan(antwerp):
    base = EvalConfig(
        params=TransformParams(POWED, tau=-157.0), metric=BC, k=6
    )
    outcome = sweep_beta(antwerp.fps, antwerp.split, base, jobs=antwerp.jobs)
    assert 2.5 <= outcome.best.cfg.params.beta <= 2.7
    assert within(outcome.best.validation.mean_m, 318.0, 0.03)
    at_e = next(r for r in outcome.results if r.cfg.params.beta == E)
    assert within(at_e.validation.mean_m, 319.0, 0.03)


@pytest.mark.criterion(7, "linear-representation baseline and positive/normalized equality")
def test_criterion_7_linear_baseline(antwerp):
    """The normalized representation is the positive one rescaled by 1/-tau,
    and Bray-Curtis is scale-invariant, so both select the same neighbors and
    produce the same errors. Equality is asserted at 2 m: distances that tie
    as exact rationals in the integer-valued positive space break by row
    index there but by rounding noise after the rescale, which perturbs the
    aggregate statistics at the sub-meter level (the published comparison
    reports integer meters)."""
    linear = (RepresentationKind.POSITIVE, RepresentationKind.NORMALIZED)
    raw = sweep_k_by_metric(
        antwerp.fps, antwerp.split, linear, tau=-200.0,
        metrics=[BC], jobs=antwerp.jobs,
    )
    adjusted = sweep_k_by_metric(
        antwerp.fps, antwerp.split, linear, tau=-157.0,
        metrics=[BC], jobs=antwerp.jobs,
    )
    assert within(raw.best.validation.mean_m, 552.0, 0.04)
    assert within(adjusted.best.validation.mean_m, 400.0, 0.04)
    for outcome in (raw, adjusted):
        positive_rows = [
            r for r in outcome.results
            if r.cfg.params.kind is RepresentationKind.POSITIVE
        ]
        normalized_rows = [
            r for r in outcome.results
            if r.cfg.params.kind is RepresentationKind.NORMALIZED
        ]
        assert len(positive_rows) == len(normalized_rows)
        for p_row, n_row in zip(positive_rows, normalized_rows):
            assert p_row.cfg.k == n_row.cfg.k
            assert abs(p_row.validation.mean_m - n_row.validation.mean_m) <= 2.0
            assert abs(p_row.validation.median_m - n_row.validation.median_m) <= 2.0


@pytest.mark.criterion(8, "haversine/vincenty agreement on the final test errors")
def test_criterion_8_geodesic_agreement(antwerp, best_cfg_table2):
    fps, split = antwerp.fps, antwerp.split
    model = fit_model(fps, split, best_cfg_table2)
    rows = split.subset(Subset.TEST)
    queries = transform_set(fps, rows, best_cfg_table2.params)
    predicted = predict_coords(model, queries.values)
    truth = fps.positions_rows(rows)
    hav = geodesic_errors(predicted, truth, GeodesicKind.HAVERSINE)
    vin = geodesic_errors(predicted, truth, GeodesicKind.VINCENTY)
    meaningful = vin > 1.0  # ignore sub-meter errors where the ratio is noise
    rel = np.abs(vin[meaningful] - hav[meaningful]) / vin[meaningful]
    assert rel.max() < 0.005
    hav_stats, vin_stats = error_stats(hav), error_stats(vin)
    assert abs(vin_stats.mean_m - hav_stats.mean_m) / vin_stats.mean_m < 0.005
    assert abs(vin_stats.median_m - hav_stats.median_m) / vin_stats.median_m < 0.005


# --- dataset-independent criteria ----------------------------------------------


def _diag(u: np.ndarray, v: np.ndarray, kind: MetricKind, chunk: int = 500) -> np.ndarray:
    out = np.empty(u.shape[0])
    for s in range(0, u.shape[0], chunk):
        block = pairwise_distance(u[s : s + chunk], v[s : s + chunk], kind)
        out[s : s + chunk] = np.diagonal(block)
    return out


@pytest.mark.criterion(9, "metric axioms on 10,000 random pairs/triples per metric")
def test_criterion_9_metric_axioms():
    rng = np.random.default_rng(99)
    n, dim = 10_000, 8
    # mix in exact zeros to exercise the 0/0 conventions
    def sample():
        vals = rng.random((n, dim)) * 1000.0
        vals[rng.random((n, dim)) < 0.2] = 0.0
        return vals

    u, v, w = sample(), sample(), sample()
    for kind in MetricKind:
        d_uv = _diag(u, v, kind)
        assert np.all(np.isfinite(d_uv))
        assert d_uv.min() >= 0.0
        assert np.array_equal(d_uv, _diag(v, u, kind))  # symmetry, bit-exact
        assert np.all(_diag(u, u, kind) == 0.0)  # identity
    for kind in (MetricKind.EUCLIDEAN, MetricKind.MANHATTAN, MetricKind.CHEBYSHEV):
        d_uw = _diag(u, w, kind)
        d_uv = _diag(u, v, kind)
        d_vw = _diag(v, w, kind)
        slack = 1e-9 + 1e-12 * (d_uv + d_vw)
        assert np.all(d_uw <= d_uv + d_vw + slack)  # triangle inequality


@pytest.mark.criterion(10, "transform properties across the full sweep ranges")
def test_criterion_10_transform_properties():
    rss = np.arange(-200.0, 1.0)  # integer dBm resolution over the data range
    taus = np.arange(-200.0, -129.0)
    alphas = np.arange(10.0, 41.0)
    betas = np.append(np.arange(200, 302, 2) / 100.0, E)
    for tau in taus:
        norm = normalized(rss, tau)
        assert np.all(np.isfinite(norm)) and norm.min() >= 0.0 and norm.max() <= 1.0
        assert np.all(np.diff(norm) >= 0.0)  # monotone in rss
        assert np.array_equal(powed(rss, tau, 1.0), norm)  # exact reduction
        for alpha in alphas:
            expo = exponential(rss, tau, alpha)
            assert np.all(np.isfinite(expo)) and expo.min() > 0.0 and expo.max() <= 1.0
            assert np.all(np.diff(expo) >= 0.0)
        for beta in betas:
            pw = powed(rss, tau, beta)
            assert np.all(np.isfinite(pw)) and pw.min() >= 0.0 and pw.max() <= 1.0
            assert np.all(np.diff(pw) >= 0.0)


@pytest.mark.criterion(11, "kNN prediction matches the exhaustive oracle, bit-exact")
def test_criterion_11_knn_oracle():
    rng = np.random.default_rng(1234)
    metrics = list(MetricKind)
    params = TransformParams(RepresentationKind.NORMALIZED, tau=-157.0)
    for _ in range(200):
        n = int(rng.integers(2, 51))
        dim = int(rng.integers(1, 11))
        k = int(rng.integers(1, n + 1))
        kind = metrics[int(rng.integers(0, len(metrics)))]
        values = rng.random((n, dim))
        if rng.random() < 0.4:  # inject duplicate rows to exercise tie-breaking
            dup_from = int(rng.integers(0, n))
            dup_to = int(rng.integers(0, n))
            values[dup_to] = values[dup_from]
        positions = np.column_stack(
            [rng.uniform(51.15, 51.27, n), rng.uniform(4.33, 4.47, n)]
        )
        query = values[int(rng.integers(0, n))] if rng.random() < 0.3 else rng.random(dim)
        model = KnnModel(
            reference=TransformedMatrix(values=values, params=params),
            positions=positions,
            metric=kind,
            k=k,
        )
        got = predict(model, query)
        dists = [distance(query, row, kind) for row in values]
        order = sorted(range(n), key=lambda i: (dists[i], i))
        want = positions[order[:k]].mean(axis=0)
        assert got.lat == want[0] and got.lon == want[1]


@pytest.mark.criterion(12, "sweep outputs identical for --jobs 1 vs --jobs 8")
def test_criterion_12_jobs_determinism(tmp_path):
    fps = synth_set(n=50, b=5, seed=21)
    dataset = tmp_path / "fps.csv"
    save_fingerprints(fps, dataset)
    split_file = tmp_path / "split.csv"
    save_split(make_split(fps, (0.6, 0.2, 0.2), seed=5), split_file)
    outputs = {}
    for jobs in ("1", "8"):
        out_dir = tmp_path / f"jobs{jobs}"
        code = cli_main(
            [
                "sweep",
                "--dataset", str(dataset),
                "--split", str(split_file),
                "--axis", "k-metric",
                "--tau", "-157",
                "--metrics", "braycurtis,euclidean,canberra",
                "--representations", "exponential,powed",
                "--k-min", "1", "--k-max", "4",
                "--out-dir", str(out_dir),
                "--tag", "d",
                "--jobs", jobs,
            ]
        )
        assert code == 0
        outputs[jobs] = (
            (out_dir / "sweep_k-metric_d.csv").read_bytes(),
            (out_dir / "table_k-metric_d.csv").read_bytes(),
        )
    assert outputs["1"] == outputs["8"]


@pytest.mark.criterion(13, "leakage guard: fitting never reads validation/test rows")
def test_criterion_13_leakage_guard():
    fps = synth_set(n=60, b=6, seed=31)
    split = make_split(fps, (0.7, 0.15, 0.15), seed=6)
    train_rows = set(split.train.tolist())

    inst = fps.instrumented()
    training_floor(inst, split)
    floor_rows = set(inst.accessed_rows().tolist())
    assert floor_rows and floor_rows <= train_rows

    inst = fps.instrumented()
    cfg = EvalConfig(
        params=TransformParams(POWED, tau=-157.0), metric=BC, k=4
    )
    fit_model(inst, split, cfg)
    fit_rows = set(inst.accessed_rows().tolist())
    assert fit_rows and fit_rows <= train_rows

    # full validation evaluation additionally reads validation rows, but
    # never test rows
    inst = fps.instrumented()
    evaluate(inst, split, cfg, Subset.VALIDATION)
    assert set(inst.accessed_rows().tolist()).isdisjoint(set(split.test.tolist()))


@pytest.mark.criterion(14, "split: disjointness, sizes, determinism, round-trip")
def test_criterion_14_split(tmp_path):
    fps = synth_set(n=14378, b=2, seed=41)
    split = make_split(fps, (0.7, 0.15, 0.15), seed=7)
    assert (split.train.size, split.validation.size, split.test.size) == (
        10064, 2157, 2157,
    )
    merged = np.concatenate([split.train, split.validation, split.test])
    assert np.unique(merged).size == 14378

    again = make_split(fps, (0.7, 0.15, 0.15), seed=7)
    assert np.array_equal(split.train, again.train)
    assert np.array_equal(split.validation, again.validation)
    assert np.array_equal(split.test, again.test)

    other = make_split(fps, (0.7, 0.15, 0.15), seed=8)
    assert other.train.size == split.train.size
    assert not np.array_equal(other.train, split.train)

    path = tmp_path / "split.csv"
    save_split(split, path)
    loaded = load_split(path, 14378)
    assert np.array_equal(split.train, loaded.train)
    assert np.array_equal(split.validation, loaded.validation)
    assert np.array_equal(split.test, loaded.test)
