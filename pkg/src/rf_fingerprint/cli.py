"""Command-line surface: ingest/inspect, split, evaluate, sweep, report.

Flags override config-file values, which override built-in defaults. The
config file is a flat key-value document (YAML syntax); presets shipping with
the package (`repro-table1`, `repro-table2`, `repro-fig3` ... `repro-fig6`)
reproduce the published experiments. Exit codes: 0 success, 2 usage or input
error, 3 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
import traceback
from dataclasses import replace
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import yaml

from . import dataset as ds
from . import report, sweep
from .errors import InputError
from .evaluate import EvalConfig, GeodesicKind, evaluate, result_row
from .transform import RepresentationKind, TransformParams
from .vecmetric import MetricKind

DEFAULT_DATASET_FILENAME = "sigfox_dataset_antwerp.csv"

DATASET_DOI = "https://doi.org/10.5281/zenodo.1193563"
SPLIT_DOI = "https://doi.org/10.5281/zenodo.3228744"
CODE_DOI = "https://doi.org/10.5281/zenodo.3228752"

_AXES = ("k-metric", "tau", "alpha", "beta", "alpha-k", "beta-k")

# Paper-protocol defaults for the scan axes: which base configuration each
# scan perturbs when the user gives nothing else.
_SCAN_BASE_DEFAULTS = {
    "tau": {"representation": "powed", "metric": "braycurtis", "k": 6, "tau": -157.0},
    "alpha": {"representation": "exponential", "metric": "braycurtis", "k": 5, "tau": -157.0},
    "alpha-k": {"representation": "exponential", "metric": "braycurtis", "k": 5, "tau": -157.0},
    "beta": {"representation": "powed", "metric": "braycurtis", "k": 6, "tau": -157.0},
    "beta-k": {"representation": "powed", "metric": "braycurtis", "k": 6, "tau": -157.0},
    "k-metric": {"representation": "powed", "metric": "braycurtis", "k": 6, "tau": -200.0},
}


class _Options:
    """Layered option lookup: CLI flag, then config file, then default."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self._args = vars(args)
        self._config = config

    def get(self, key: str, default=None):
        value = self._args.get(key)
        if value is None:
            value = self._config.get(key)
        return default if value is None else value


def _load_config(name: str | None) -> dict:
    if name is None:
        return {}
    path = Path(name)
    if path.exists():
        text = path.read_text(encoding="utf-8")
    else:
        candidate = name if name.endswith(".cfg") else f"{name}.cfg"
        preset = resources.files("rf_fingerprint").joinpath("presets", candidate)
        if not preset.is_file():
            raise InputError(f"config not found: {name!r} (no such file or preset)")
        text = preset.read_text(encoding="utf-8")
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise InputError("config must be a flat key-value mapping")
    return data


def _parse_names(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v).strip() for v in value]
    return [part.strip() for part in str(value).split(",") if part.strip()]


def _enum_by_value(enum_cls, name: str):
    for member in enum_cls:
        if member.value == name.lower():
            return member
    valid = ", ".join(m.value for m in enum_cls)
    raise InputError(f"unknown {enum_cls.__name__} {name!r}; expected one of: {valid}")


def _schema(opt: _Options) -> ds.CsvSchema:
    explicit = opt.get("rssi_columns")
    return ds.CsvSchema(
        lat_column=str(opt.get("lat_column", "Latitude")),
        lon_column=str(opt.get("lon_column", "Longitude")),
        rssi_columns=tuple(_parse_names(explicit)) if explicit else None,
        rssi_prefix=str(opt.get("rssi_prefix", "BS")),
        sentinel=float(opt.get("sentinel", -200.0)),
    )


def _dataset_path(opt: _Options) -> Path:
    path = opt.get("dataset")
    if path is None:
        data_dir = os.environ.get("RFF_DATA_DIR")
        if data_dir:
            path = Path(data_dir) / DEFAULT_DATASET_FILENAME
    if path is None:
        raise InputError(
            "no dataset given: pass --dataset, set `dataset:` in the config, "
            "or point RFF_DATA_DIR at a directory containing "
            f"{DEFAULT_DATASET_FILENAME}"
        )
    path = Path(path)
    if not path.exists():
        raise InputError(f"dataset file not found: {path}")
    return path


def _load_dataset(opt: _Options) -> ds.FingerprintSet:
    return ds.load_fingerprints(_dataset_path(opt), _schema(opt))


def _parse_ratios(value) -> tuple[float, float, float]:
    if isinstance(value, (list, tuple)):
        parts = [float(v) for v in value]
    else:
        parts = [float(p) for p in str(value).split(",")]
    if len(parts) != 3:
        raise InputError(f"ratios must be three numbers, got {value!r}")
    return (parts[0], parts[1], parts[2])


def _split_for(opt: _Options, fps: ds.FingerprintSet) -> ds.SplitIndices:
    split_path = opt.get("split")
    ratios = opt.get("ratios")
    if split_path is not None and ratios is not None:
        raise InputError("give exactly one split source: --split or --ratios/--seed")
    if split_path is not None:
        path = Path(split_path)
        if not path.exists():
            raise InputError(f"split file not found: {path}")
        return ds.load_split(path, fps.n_messages, synonyms=True)
    if ratios is not None:
        return ds.make_split(fps, _parse_ratios(ratios), int(opt.get("seed", 0)))
    raise InputError("no split source: pass --split FILE or --ratios R,R,R [--seed N]")


def _tag(opt: _Options) -> str:
    tag = opt.get("tag")
    if tag is not None:
        return str(tag)
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def _base_config(opt: _Options, axis: str) -> EvalConfig:
    defaults = _SCAN_BASE_DEFAULTS[axis]
    kind = _enum_by_value(
        RepresentationKind, str(opt.get("representation", defaults["representation"]))
    )
    params = TransformParams(
        kind=kind,
        tau=float(opt.get("tau", defaults["tau"])),
        alpha=float(opt.get("alpha", 24.0)),
        beta=float(opt.get("beta", math.e)),
    )
    return EvalConfig(
        params=params,
        metric=_enum_by_value(MetricKind, str(opt.get("metric", defaults["metric"]))),
        k=int(opt.get("k", defaults["k"])),
        geodesic=_enum_by_value(GeodesicKind, str(opt.get("geodesic", "haversine"))),
    )


def _int_range(opt: _Options, key: str, lo_default: int, hi_default: int) -> list[int]:
    lo = int(opt.get(f"{key}_min", lo_default))
    hi = int(opt.get(f"{key}_max", hi_default))
    if hi < lo:
        raise InputError(f"{key} range is empty: [{lo}, {hi}]")
    return list(range(lo, hi + 1))


def _beta_values(opt: _Options) -> list[float]:
    lo = float(opt.get("beta_min", 2.0))
    hi = float(opt.get("beta_max", 3.0))
    step = float(opt.get("beta_step", 0.02))
    if step <= 0 or hi < lo:
        raise InputError(f"bad beta range: [{lo}, {hi}] step {step}")
    # integer-scaled stepping keeps the grid values exactly representable
    scale = 10**9
    lo_i, step_i = round(lo * scale), round(step * scale)
    count = int((round(hi * scale) - lo_i) // step_i)
    values = [(lo_i + i * step_i) / scale for i in range(count + 1)]
    if lo <= math.e <= hi and math.e not in values:
        values.append(math.e)
    return sorted(values)


# --- command handlers -------------------------------------------------------


def _cmd_stats(opt: _Options) -> int:
    fps = _load_dataset(opt)
    stats = ds.stats(fps, bin_width=float(opt.get("bin_width", 1.0)))
    fmt = lambda v: "n/a" if v is None else f"{v:g}"  # noqa: E731
    print(
        f"messages={stats.n_messages} basestations={stats.n_basestations} "
        f"received={stats.n_received} min_received={fmt(stats.min_received)} "
        f"max_received={fmt(stats.max_received)}"
    )
    out_dir = opt.get("out_dir")
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        tag = _tag(opt)
        csv_path = out_dir / f"stats_hist_{tag}.csv"
        ds.write_stats_csv(stats, csv_path)
        report.plot_rssi_histogram(out_dir / f"stats_hist_{tag}.svg", stats)
        print(f"wrote {csv_path}")
    return 0


def _cmd_split(opt: _Options, from_zenodo: list[str] | None) -> int:
    schema = _schema(opt)
    fps = _load_dataset(opt)
    n = fps.n_messages
    if from_zenodo:
        for name in from_zenodo:
            if not Path(name).exists():
                raise InputError(f"split file not found: {name}")
        if len(from_zenodo) == 1:
            split = ds.load_split(Path(from_zenodo[0]), n, synonyms=True)
        elif len(from_zenodo) == 3:
            arrays = []
            for path in from_zenodo:
                path = Path(path)
                try:
                    arrays.append(ds.load_index_list(path))
                except ds.MalformedRow:
                    # not an index list: a full-row subset file
                    arrays.append(ds.match_rows_to_indices(fps, path, schema))
            split = ds.split_from_subset_indices(*arrays, n=n)
        else:
            raise InputError(
                "--from-zenodo takes one index/subset file or three subset files "
                "(train validation test)"
            )
    else:
        ratios = opt.get("ratios")
        if ratios is None:
            raise InputError("no split source: pass --ratios R,R,R or --from-zenodo")
        split = ds.make_split(fps, _parse_ratios(ratios), int(opt.get("seed", 0)))
    out = Path(opt.get("out", "split.csv"))
    ds.save_split(split, out)
    print(
        f"wrote {out} (train={split.train.size} validation={split.validation.size} "
        f"test={split.test.size})"
    )
    return 0


def _final_test_line(fps, split, cfg: EvalConfig) -> dict:
    stats = evaluate(fps, split, cfg, ds.Subset.TEST)
    row = result_row(cfg, ds.Subset.TEST, stats)
    print("FINAL " + " ".join(f"{k}={v}" for k, v in row.items()))
    return row


def _cmd_eval(opt: _Options) -> int:
    target_name = str(opt.get("target", "validation")).lower()
    if target_name not in ("validation", "test"):
        raise InputError(f"--target must be validation or test, got {target_name!r}")
    final = bool(opt.get("final", False))
    if target_name == "test" and not final:
        raise InputError(
            "refusing to evaluate on the test set without --final: the test set "
            "is reserved for the one measurement after tuning is finished"
        )
    fps = _load_dataset(opt)
    split = _split_for(opt, fps)
    cfg = _base_config(opt, "k-metric")
    target = ds.Subset.TEST if target_name == "test" else ds.Subset.VALIDATION
    stats = evaluate(fps, split, cfg, target)
    row = result_row(cfg, target, stats)
    prefix = "FINAL " if target is ds.Subset.TEST else ""
    print(prefix + " ".join(f"{k}={v}" for k, v in row.items()))
    out_dir = opt.get("out_dir")
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"eval_{_tag(opt)}.csv"
        report.write_rows_csv(path, [row])
        print(f"wrote {path}")
    return 0


def _cmd_sweep(opt: _Options) -> int:
    axis = str(opt.get("axis", "")).lower()
    if axis not in _AXES:
        raise InputError(f"--axis must be one of {', '.join(_AXES)}; got {axis!r}")
    fps = _load_dataset(opt)
    split = _split_for(opt, fps)
    jobs = int(opt.get("jobs", os.cpu_count() or 1))
    base = _base_config(opt, axis)
    k_values = _int_range(opt, "k", 1, 20)

    if axis == "k-metric":
        reps = [
            _enum_by_value(RepresentationKind, name)
            for name in _parse_names(opt.get("representations", "exponential,powed"))
        ]
        metrics = [
            _enum_by_value(MetricKind, name)
            for name in _parse_names(
                opt.get("metrics", ",".join(m.value for m in MetricKind))
            )
        ]
        outcome = sweep.sweep_k_by_metric(
            fps,
            split,
            reps,
            tau=base.params.tau,
            k_values=k_values,
            metrics=metrics,
            alpha=base.params.alpha,
            beta=base.params.beta,
            geodesic=base.geodesic,
            jobs=jobs,
        )
    elif axis == "tau":
        taus = [float(t) for t in _int_range(opt, "tau", -200, -130)]
        outcome = sweep.sweep_tau(fps, split, base, taus, jobs=jobs)
    elif axis in ("alpha", "alpha-k"):
        alphas = [float(a) for a in _int_range(opt, "alpha", 10, 40)]
        ks = k_values if axis == "alpha-k" else None
        outcome = sweep.sweep_alpha(fps, split, base, alphas, ks, jobs=jobs)
    else:  # beta, beta-k
        betas = _beta_values(opt)
        ks = k_values if axis == "beta-k" else None
        outcome = sweep.sweep_beta(fps, split, base, betas, ks, jobs=jobs)

    out_dir = Path(opt.get("out_dir", "."))
    written = report.render_sweep_files(out_dir, _tag(opt), outcome)
    best_row = result_row(outcome.best.cfg, ds.Subset.VALIDATION, outcome.best.validation)
    print("best: " + " ".join(f"{k}={v}" for k, v in best_row.items()))
    for path in written:
        print(f"wrote {path}")
    if bool(opt.get("final", False)):
        row = _final_test_line(fps, split, outcome.best.cfg)
        path = out_dir / f"eval_{_tag(opt)}_final.csv"
        report.write_rows_csv(path, [row])
        print(f"wrote {path}")
    return 0


def _cmd_report(opt: _Options) -> int:
    results_dir = Path(opt.get("results", "."))
    if not results_dir.is_dir():
        raise InputError(f"results directory not found: {results_dir}")
    dest = report.write_markdown_report(results_dir, opt.get("out"))
    print(f"wrote {dest}")
    return 0


def _cmd_fetch(opt: _Options, verify: list[str] | None, manifest: str | None) -> int:
    print("This tool never downloads data. Fetch the published artifacts yourself:")
    print(f"  Antwerp Sigfox fingerprint dataset:  {DATASET_DOI}")
    print(f"  train/validation/test split:         {SPLIT_DOI}")
    print(f"  original experiment code:            {CODE_DOI}")
    print(f"Place the dataset as $RFF_DATA_DIR/{DEFAULT_DATASET_FILENAME}.")
    status = 0
    digests: dict[str, str] = {}
    for name in verify or []:
        path = Path(name)
        if not path.exists():
            raise InputError(f"file not found: {path}")
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        digests[path.name] = digest
        print(f"{digest}  {path}")
    if manifest is not None:
        manifest_path = Path(manifest)
        if not manifest_path.exists():
            raise InputError(f"manifest not found: {manifest_path}")
        for line in manifest_path.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                expected, filename = line.split(None, 1)
            except ValueError:
                raise InputError(f"bad manifest line: {line!r}") from None
            filename = filename.strip().lstrip("*")
            target = manifest_path.parent / filename
            if Path(filename).name in digests:
                actual = digests[Path(filename).name]
            elif target.exists():
                actual = hashlib.sha256(target.read_bytes()).hexdigest()
            else:
                print(f"MISSING  {filename}")
                status = 2
                continue
            if actual == expected.lower():
                print(f"OK       {filename}")
            else:
                print(f"MISMATCH {filename}")
                status = 2
    return status


# --- argument parsing --------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser, *, split_source: bool = False):
    parser.add_argument("--config", help="config file path or preset name")
    parser.add_argument("--dataset", help="fingerprint CSV path")
    parser.add_argument("--lat-column", help="latitude column name (default Latitude)")
    parser.add_argument("--lon-column", help="longitude column name (default Longitude)")
    parser.add_argument(
        "--rssi-columns", help="explicit comma-separated RSSI column names"
    )
    parser.add_argument("--rssi-prefix", help="RSSI column name prefix (default BS)")
    parser.add_argument("--sentinel", type=float, help="not-received value (default -200)")
    if split_source:
        parser.add_argument("--split", help="split file (canonical or compatible layout)")
        parser.add_argument("--ratios", help="train,val,test ratios for a generated split")
        parser.add_argument("--seed", type=int, help="seed for a generated split")


def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--representation", help="positive|normalized|exponential|powed")
    parser.add_argument("--tau", type=float, help="detection threshold, dBm")
    parser.add_argument("--alpha", type=float, help="exponential shape parameter")
    parser.add_argument("--beta", type=float, help="powed exponent")
    parser.add_argument("--metric", help="|".join(m.value for m in MetricKind))
    parser.add_argument("--k", type=int, help="number of neighbors")
    parser.add_argument("--geodesic", help="haversine|vincenty (default haversine)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rf-fingerprint",
        description="RSSI-fingerprint outdoor localization: kNN positioning, "
        "RSSI representations, and hyperparameter sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset counts and RSSI histogram")
    _add_common(p)
    p.add_argument("--bin-width", type=float, help="histogram bin width, dBm (default 1)")
    p.add_argument("--out-dir", help="write histogram CSV/SVG here")
    p.add_argument("--tag", help="output filename tag (default: UTC timestamp)")

    p = sub.add_parser("split", help="generate or normalize a train/validation/test split")
    _add_common(p)
    p.add_argument("--ratios", help="train,val,test ratios, e.g. 0.7,0.15,0.15")
    p.add_argument("--seed", type=int, help="shuffle seed (default 0)")
    p.add_argument(
        "--from-zenodo",
        nargs="+",
        metavar="FILE",
        help="published split artifact: one index/subset file, or three subset "
        "files (train validation test) holding indices or full rows",
    )
    p.add_argument("--out", help="output split file (default split.csv)")

    p = sub.add_parser("eval", help="evaluate one configuration")
    _add_common(p, split_source=True)
    _add_config_flags(p)
    p.add_argument("--target", help="validation (default) or test")
    p.add_argument(
        "--final",
        action="store_true",
        default=None,
        help="allow the final test-set evaluation",
    )
    p.add_argument("--out-dir", help="write the result CSV here")
    p.add_argument("--tag", help="output filename tag (default: UTC timestamp)")

    p = sub.add_parser("sweep", help="hyperparameter sweep along one axis")
    _add_common(p, split_source=True)
    _add_config_flags(p)
    p.add_argument("--axis", help="|".join(_AXES))
    p.add_argument("--metrics", help="comma-separated metric list (k-metric axis)")
    p.add_argument(
        "--representations", help="comma-separated representation list (k-metric axis)"
    )
    p.add_argument("--k-min", type=int, help="smallest k (default 1)")
    p.add_argument("--k-max", type=int, help="largest k (default 20)")
    p.add_argument("--tau-min", type=int, help="lowest tau, dBm (default -200)")
    p.add_argument("--tau-max", type=int, help="highest tau, dBm (default -130)")
    p.add_argument("--alpha-min", type=int, help="lowest alpha (default 10)")
    p.add_argument("--alpha-max", type=int, help="highest alpha (default 40)")
    p.add_argument("--beta-min", type=float, help="lowest beta (default 2)")
    p.add_argument("--beta-max", type=float, help="highest beta (default 3)")
    p.add_argument("--beta-step", type=float, help="beta step (default 0.02)")
    p.add_argument("--jobs", type=int, help="parallel workers (default: logical cores)")
    p.add_argument("--out-dir", help="artifact directory (default .)")
    p.add_argument("--tag", help="output filename tag (default: UTC timestamp)")
    p.add_argument(
        "--final",
        action="store_true",
        default=None,
        help="after the sweep, evaluate the winning configuration on the test set",
    )

    p = sub.add_parser("report", help="consolidate result CSVs into a markdown report")
    p.add_argument("--config", help="config file path or preset name")
    p.add_argument("--results", help="directory containing result CSVs (default .)")
    p.add_argument("--out", help="report path (default <results>/report.md)")

    p = sub.add_parser("fetch", help="print data DOIs and verify checksums")
    p.add_argument("--config", help="config file path or preset name")
    p.add_argument("--verify", nargs="+", metavar="FILE", help="print sha256 of files")
    p.add_argument("--manifest", help="sha256 manifest to check files against")

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        opt = _Options(args, _load_config(getattr(args, "config", None)))
        if args.command == "stats":
            return _cmd_stats(opt)
        if args.command == "split":
            return _cmd_split(opt, args.from_zenodo)
        if args.command == "eval":
            return _cmd_eval(opt)
        if args.command == "sweep":
            return _cmd_sweep(opt)
        if args.command == "report":
            return _cmd_report(opt)
        if args.command == "fetch":
            return _cmd_fetch(opt, args.verify, args.manifest)
        parser.error(f"unknown command {args.command!r}")
    except (InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:  # internal invariant violation
        traceback.print_exc()
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
