"""Result files: CSV tables, SVG figures, and the consolidated report.

All emission is deterministic for fixed inputs: rows keep grid order, files
are discovered in sorted order, and the SVG backend is salted with a fixed
string so regenerated figures differ only in their creation date (which is
stripped).
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .dataset import DatasetStats, Subset  # noqa: E402
from .errors import InputError  # noqa: E402
from .evaluate import RESULT_COLUMNS, result_row  # noqa: E402
from .sweep import KMetricOutcome, ScanOutcome  # noqa: E402

plt.rcParams["svg.hashsalt"] = "rf-fingerprint"
plt.rcParams["figure.figsize"] = (7.0, 4.5)

_SAVEFIG_KWARGS = {"metadata": {"Date": None}, "bbox_inches": "tight"}


def rows_from_results(results, target: Subset = Subset.VALIDATION) -> list[dict]:
    return [result_row(r.cfg, target, r.validation) for r in results]


def write_rows_csv(dest, rows: list[dict]):
    own = isinstance(dest, (str, Path))
    stream = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.DictWriter(stream, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if own:
            stream.close()


def read_rows_csv(path) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as stream:
        return list(csv.DictReader(stream))


def pivot_k_table(rows: list[dict]) -> tuple[list[str], list[list[str]]]:
    """Best-k table: one row per metric, (k, mean, median) per representation.

    The best cell is the row with the lowest mean, ties to the smaller k,
    mirroring the sweep's own selection rule.
    """
    reps: list[str] = []
    metrics: list[str] = []
    cells: dict[tuple[str, str], dict] = {}
    for row in rows:
        metric, rep = row["metric"], row["representation"]
        if rep not in reps:
            reps.append(rep)
        if metric not in metrics:
            metrics.append(metric)
        key = (metric, rep)
        best = cells.get(key)
        candidate = (float(row["mean_m"]), int(row["k"]))
        if best is None or candidate < (float(best["mean_m"]), int(best["k"])):
            cells[key] = row
    header = ["metric"]
    for rep in reps:
        header += [f"{rep}_k", f"{rep}_mean_m", f"{rep}_median_m"]
    table = []
    for metric in metrics:
        line = [metric]
        for rep in reps:
            cell = cells.get((metric, rep))
            if cell is None:
                line += ["", "", ""]
            else:
                line += [cell["k"], cell["mean_m"], cell["median_m"]]
        table.append(line)
    return header, table


def write_table_csv(dest, rows: list[dict]):
    header, table = pivot_k_table(rows)
    own = isinstance(dest, (str, Path))
    stream = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.writer(stream)
        writer.writerow(header)
        writer.writerows(table)
    finally:
        if own:
            stream.close()


def _save(fig, dest):
    fig.savefig(dest, **_SAVEFIG_KWARGS)
    plt.close(fig)


def plot_scan(dest, rows: list[dict], x_key: str, x_label: str | None = None):
    """Line chart of validation mean error against one scanned parameter."""
    xs = [float(r[x_key]) for r in rows]
    ys = [float(r["mean_m"]) for r in rows]
    fig, ax = plt.subplots()
    ax.plot(xs, ys, marker=".", linewidth=1.0)
    ax.set_xlabel(x_label or x_key)
    ax.set_ylabel("mean error on the validation set (m)")
    ax.grid(True, alpha=0.4)
    _save(fig, dest)


def plot_grid_heatmap(dest, rows: list[dict], param_key: str):
    """Heat map of validation mean error over (parameter, k) combinations."""
    param_values = sorted({float(r[param_key]) for r in rows})
    k_values = sorted({int(r["k"]) for r in rows})
    index = {
        (float(r[param_key]), int(r["k"])): float(r["mean_m"]) for r in rows
    }
    grid = [
        [index.get((p, k), float("nan")) for k in k_values] for p in param_values
    ]
    fig, ax = plt.subplots()
    image = ax.imshow(grid, origin="lower", aspect="auto")
    ax.set_xticks(range(len(k_values)), [str(k) for k in k_values])
    step = max(1, len(param_values) // 12)
    ax.set_yticks(
        range(0, len(param_values), step),
        [f"{p:g}" for p in param_values[::step]],
    )
    ax.set_xlabel("k")
    ax.set_ylabel(param_key)
    fig.colorbar(image, ax=ax, label="mean error on the validation set (m)")
    _save(fig, dest)


def plot_k_curves(dest, rows: list[dict]):
    """Mean error against k, one line per metric, one panel per representation."""
    reps: list[str] = []
    for row in rows:
        if row["representation"] not in reps:
            reps.append(row["representation"])
    fig, axes = plt.subplots(1, len(reps), sharey=True, squeeze=False)
    for ax, rep in zip(axes[0], reps):
        metrics: list[str] = []
        for row in rows:
            if row["representation"] == rep and row["metric"] not in metrics:
                metrics.append(row["metric"])
        for metric in metrics:
            pts = [
                (int(r["k"]), float(r["mean_m"]))
                for r in rows
                if r["representation"] == rep and r["metric"] == metric
            ]
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker=".", label=metric)
        ax.set_title(rep)
        ax.set_xlabel("k")
        ax.grid(True, alpha=0.4)
    axes[0][0].set_ylabel("mean error on the validation set (m)")
    axes[0][-1].legend(fontsize="small")
    _save(fig, dest)


def plot_rssi_histogram(dest, dataset_stats: DatasetStats):
    """Histogram of received RSSI values (sentinels excluded)."""
    edges = dataset_stats.histogram_edges
    counts = dataset_stats.histogram_counts
    fig, ax = plt.subplots()
    if len(edges):
        widths = edges[1:] - edges[:-1]
        ax.bar(edges[:-1], counts, width=widths, align="edge", edgecolor="none")
    ax.set_xlabel("RSSI (dBm)")
    ax.set_ylabel("receptions")
    ax.grid(True, axis="y", alpha=0.4)
    _save(fig, dest)


def render_sweep_files(out_dir, tag: str, outcome: ScanOutcome) -> list[Path]:
    """Write the CSV (and pivot/figure siblings) for one sweep outcome."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = f"sweep_{outcome.axis}_{tag}"
    rows = rows_from_results(outcome.results)
    csv_path = out_dir / f"{base}.csv"
    svg_path = out_dir / f"{base}.svg"
    write_rows_csv(csv_path, rows)
    written = [csv_path]
    if outcome.axis == "k-metric":
        table_path = out_dir / f"table_k-metric_{tag}.csv"
        write_table_csv(table_path, rows)
        plot_k_curves(svg_path, rows)
        written += [table_path, svg_path]
    elif outcome.axis in ("tau", "alpha", "beta"):
        labels = {"tau": "tau (dBm)", "alpha": "alpha", "beta": "beta"}
        plot_scan(svg_path, rows, outcome.axis, labels[outcome.axis])
        written.append(svg_path)
    elif outcome.axis in ("alpha-k", "beta-k"):
        plot_grid_heatmap(svg_path, rows, outcome.axis.split("-")[0])
        written.append(svg_path)
    else:
        raise InputError(f"unknown sweep axis: {outcome.axis!r}")
    return written


def _md_table(header: list[str], rows: list[list[str]]) -> list[str]:
    out = ["| " + " | ".join(header) + " |"]
    out.append("|" + "|".join(" --- " for _ in header) + "|")
    out += ["| " + " | ".join(str(v) for v in row) + " |" for row in rows]
    return out


def _best_row(rows: list[dict]) -> dict:
    return min(rows, key=lambda r: (float(r["mean_m"]), int(r["k"]), r["metric"]))


def _describe(row: dict) -> str:
    keys = ("metric", "representation", "tau", "alpha", "beta", "k", "mean_m", "median_m")
    return " ".join(f"{k}={row[k]}" for k in keys)


def write_markdown_report(results_dir, dest=None) -> Path:
    """Consolidate every result CSV in a directory into one markdown report.

    Regenerating from the same directory produces byte-identical output.
    """
    results_dir = Path(results_dir)
    sweep_files = sorted(results_dir.glob("sweep_*.csv"))
    eval_files = sorted(results_dir.glob("eval_*.csv"))
    stats_files = sorted(results_dir.glob("stats_*.csv"))
    if not (sweep_files or eval_files or stats_files):
        raise InputError(f"no result files found in {results_dir}")

    lines = ["# RSSI fingerprint localization report", ""]
    validation_rows: list[dict] = []
    for path in sweep_files:
        rows = read_rows_csv(path)
        axis = path.stem.split("_")[1] if "_" in path.stem else "?"
        lines += [f"## Sweep `{axis}` ({path.name})", ""]
        if not rows:
            lines += ["(empty)", ""]
            continue
        validation_rows += rows
        if axis == "k-metric":
            header, table = pivot_k_table(rows)
            lines += _md_table(header, table)
            lines.append("")
        best = _best_row(rows)
        lines += [f"best: {_describe(best)}", ""]
        svg = path.with_suffix(".svg")
        if svg.exists():
            lines += [f"![{axis}]({svg.name})", ""]

    for path in eval_files:
        rows = read_rows_csv(path)
        lines += [f"## Evaluation ({path.name})", ""]
        if rows:
            lines += _md_table(list(rows[0].keys()), [list(r.values()) for r in rows])
        lines.append("")

    for path in stats_files:
        lines += [f"## Dataset statistics ({path.name})", ""]
        svg = path.with_suffix(".svg")
        if svg.exists():
            lines += [f"![histogram]({svg.name})", ""]

    if validation_rows:
        best = _best_row(validation_rows)
        lines += ["## Best validation configuration", "", _describe(best), ""]

    dest = Path(dest) if dest is not None else results_dir / "report.md"
    dest.write_text("\n".join(lines), encoding="utf-8")
    return dest
