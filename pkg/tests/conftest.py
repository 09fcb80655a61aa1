"""Shared fixtures: synthetic fingerprint sets, the optional real dataset,
and the acceptance-criterion result lines printed after a run."""

from __future__ import annotations

import os
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from rf_fingerprint.dataset import (
    CsvSchema,
    FingerprintSet,
    load_fingerprints,
    load_split,
    make_split,
)

# Rough bounding box of the urban collection area; synthetic fixtures and
# random-pair geo tests stay inside it.
ANTWERP_BOX = ((51.15, 51.27), (4.33, 4.47))


def synth_set(
    n: int = 30,
    b: int = 5,
    seed: int = 0,
    reception_rate: float = 0.8,
    rssi_range: tuple[int, int] = (-150, -60),
    box=ANTWERP_BOX,
    sentinel: float = -200.0,
) -> FingerprintSet:
    """Random integer-valued fingerprint set with every row received somewhere."""
    rng = np.random.default_rng(seed)
    rssi = rng.integers(rssi_range[0], rssi_range[1] + 1, size=(n, b)).astype(float)
    mask = rng.random((n, b)) >= reception_rate
    rssi[mask] = sentinel
    for i in range(n):
        if np.all(rssi[i] == sentinel):
            j = int(rng.integers(0, b))
            rssi[i, j] = float(rng.integers(rssi_range[0], rssi_range[1] + 1))
    (lat_lo, lat_hi), (lon_lo, lon_hi) = box
    positions = np.column_stack(
        [rng.uniform(lat_lo, lat_hi, size=n), rng.uniform(lon_lo, lon_hi, size=n)]
    )
    return FingerprintSet(
        rssi=rssi,
        positions=positions,
        basestation_ids=tuple(f"BS {i + 1}" for i in range(b)),
        sentinel=sentinel,
    )


@pytest.fixture
def small_set() -> FingerprintSet:
    return synth_set(n=30, b=5, seed=7)


@pytest.fixture
def small_split(small_set):
    return make_split(small_set, (0.6, 0.2, 0.2), seed=1)


# --- real dataset (optional) -------------------------------------------------


def _data_dir() -> Path:
    return Path(os.environ.get("RFF_DATA_DIR", "data"))


def dataset_path() -> Path:
    override = os.environ.get("RFF_DATASET")
    return Path(override) if override else _data_dir() / "sigfox_dataset_antwerp.csv"


def split_path() -> Path:
    override = os.environ.get("RFF_SPLIT")
    return Path(override) if override else _data_dir() / "split.csv"


@pytest.fixture(scope="session")
def antwerp():
    """The published Antwerp Sigfox dataset plus the study's split.

    Skips (with instructions) when the data is not mounted: the dataset is
    published on Zenodo and is not redistributed with this repository. When
    no split file is present a seeded 70/15/15 split is generated instead;
    reproduction tolerances were stated for the published split, so prefer
    supplying it.
    """
    path = dataset_path()
    if not path.exists():
        pytest.skip(
            f"Antwerp Sigfox dataset not found at {path}; download it "
            "(rf-fingerprint fetch prints the DOIs) and set RFF_DATA_DIR "
            "or RFF_DATASET"
        )
    fps = load_fingerprints(path, CsvSchema())
    sp = split_path()
    if sp.exists():
        split = load_split(sp, fps.n_messages, synonyms=True)
        generated = False
    else:
        split = make_split(fps, (0.70, 0.15, 0.15), seed=20190529)
        generated = True
    jobs = int(os.environ.get("RFF_JOBS", os.cpu_count() or 1))
    return SimpleNamespace(fps=fps, split=split, generated_split=generated, jobs=jobs)


# --- acceptance criterion reporting ------------------------------------------

_criterion_outcomes: dict[tuple, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    key = (marker.args[0], marker.args[1])
    if rep.when == "call":
        _criterion_outcomes[key] = rep.outcome
    elif rep.when == "setup" and rep.outcome != "passed":
        _criterion_outcomes[key] = rep.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for (num, title), outcome in sorted(_criterion_outcomes.items()):
        label = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(
            outcome, outcome.upper()
        )
        terminalreporter.write_line(f"criterion {num:>2}  {label:<4}  {title}")
