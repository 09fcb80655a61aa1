"""Fingerprint dataset ingestion, train/validation/test splits, statistics.

The on-disk format is a CSV with one row per transmitted message: a ground
truth latitude/longitude pair plus one RSSI column per basestation, where a
sentinel value (-200 dBm by default) marks basestations that did not receive
the message. Column names are configuration, not code: :class:`CsvSchema`
describes the layout and ships with defaults matching the public Antwerp
Sigfox CSV. Sentinels are stored verbatim; all clamping/rescaling belongs to
the transform stage, so threshold experiments never require re-ingestion.

Everything here is training-data aware: :func:`training_floor` computes the
detection floor from training rows only, and every row access goes through
accessors that can be instrumented to prove no validation/test row is read
during preprocessing or fitting.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InputError
from .geo import GeoPoint


class MalformedRow(InputError):
    """A CSV data row could not be parsed. `line` is the 1-based file line."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class MissingColumn(InputError):
    def __init__(self, name: str):
        super().__init__(f"required column not found: {name!r}")
        self.name = name


class EmptyDataset(InputError):
    pass


class BadRatios(InputError):
    pass


class IndexOutOfRange(InputError):
    def __init__(self, index: int, n: int):
        super().__init__(f"row index {index} outside [0, {n})")
        self.index = index


class DuplicateIndex(InputError):
    def __init__(self, index: int):
        super().__init__(f"row index {index} assigned more than once")
        self.index = index


class InvalidSplit(InputError):
    pass


class NoReceivedValues(InputError):
    """Every RSSI entry in the selected rows is the sentinel."""


class Subset(enum.Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


@dataclass(frozen=True)
class CsvSchema:
    """Column layout of a fingerprint CSV.

    `rssi_columns` (explicit list) wins over `rssi_prefix`; with a prefix,
    every header starting with it is taken as a basestation column, in file
    order. Columns named by neither rule are ignored.
    """

    lat_column: str = "Latitude"
    lon_column: str = "Longitude"
    rssi_columns: tuple[str, ...] | None = None
    rssi_prefix: str = "BS"
    sentinel: float = -200.0


@dataclass(frozen=True, eq=False)
class FingerprintSet:
    """An immutable N x B matrix of RSSI values plus ground-truth positions.

    `rssi[i, j]` is the dBm value message i was received with at basestation
    j, or `sentinel` when basestation j did not receive it. Every non-sentinel
    value is <= 0 and strictly greater than the sentinel. `positions[i]` is
    the (lat, lon) ground truth of message i.

    Row reads go through :meth:`rssi_rows` / :meth:`positions_rows`; when
    `access_log` is a list (see :meth:`instrumented`) each call appends the
    requested indices, which lets tests prove which rows a pipeline touched.
    """

    rssi: np.ndarray
    positions: np.ndarray
    basestation_ids: tuple[str, ...]
    sentinel: float = -200.0
    access_log: list | None = field(default=None, repr=False)

    def __post_init__(self):
        rssi = np.asarray(self.rssi, dtype=np.float64)
        positions = np.asarray(self.positions, dtype=np.float64)
        if rssi.ndim != 2 or rssi.shape[0] < 1 or rssi.shape[1] < 1:
            raise InputError(f"rssi must be a non-empty 2-D matrix, got shape {rssi.shape}")
        n, b = rssi.shape
        if positions.shape != (n, 2):
            raise InputError(
                f"positions must have shape ({n}, 2), got {positions.shape}"
            )
        if len(self.basestation_ids) != b:
            raise InputError(
                f"{len(self.basestation_ids)} basestation ids for {b} RSSI columns"
            )
        if not math.isfinite(self.sentinel):
            raise InputError("sentinel must be finite")
        if not np.all(np.isfinite(rssi)):
            raise InputError("rssi contains non-finite values")
        non_sentinel = rssi[rssi != self.sentinel]
        if non_sentinel.size and (non_sentinel.min() < self.sentinel):
            raise InputError("RSSI value below the sentinel")
        if non_sentinel.size and (non_sentinel.max() > 0.0):
            raise InputError("positive RSSI value")
        lat, lon = positions[:, 0], positions[:, 1]
        if not (np.all(np.abs(lat) <= 90.0) and np.all(np.isfinite(lat))):
            raise InputError("latitude out of range [-90, 90]")
        if not (np.all(np.abs(lon) <= 180.0) and np.all(np.isfinite(lon))):
            raise InputError("longitude out of range [-180, 180]")
        rssi.flags.writeable = False
        positions.flags.writeable = False
        object.__setattr__(self, "rssi", rssi)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "basestation_ids", tuple(self.basestation_ids))

    @property
    def n_messages(self) -> int:
        return self.rssi.shape[0]

    @property
    def n_basestations(self) -> int:
        return self.rssi.shape[1]

    def _log(self, rows: np.ndarray):
        if self.access_log is not None:
            self.access_log.append(np.array(rows, copy=True))

    def rssi_rows(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        self._log(rows)
        return self.rssi[rows]

    def positions_rows(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        self._log(rows)
        return self.positions[rows]

    def position(self, i: int) -> GeoPoint:
        return GeoPoint(float(self.positions[i, 0]), float(self.positions[i, 1]))

    def instrumented(self) -> "FingerprintSet":
        """A view of this set (shared arrays) that records row accesses."""
        return replace(self, access_log=[])

    def accessed_rows(self) -> np.ndarray:
        """Distinct row indices read so far through the instrumented view."""
        if not self.access_log:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate(self.access_log))


@dataclass(frozen=True)
class SplitIndices:
    """Disjoint train/validation/test row-index sets, each stored sorted."""

    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        parts = {}
        for name in ("train", "validation", "test"):
            arr = np.sort(np.asarray(getattr(self, name), dtype=np.int64))
            if arr.size == 0:
                raise InvalidSplit(f"{name} subset is empty")
            if arr[0] < 0:
                raise InvalidSplit(f"{name} subset contains a negative index")
            if np.any(arr[1:] == arr[:-1]):
                raise InvalidSplit(f"{name} subset contains duplicate indices")
            arr.flags.writeable = False
            parts[name] = arr
        merged = np.concatenate(list(parts.values()))
        if np.unique(merged).size != merged.size:
            raise InvalidSplit("train/validation/test subsets overlap")
        for name, arr in parts.items():
            object.__setattr__(self, name, arr)

    def subset(self, which: Subset) -> np.ndarray:
        return getattr(self, which.value)

    @property
    def n_total(self) -> int:
        return self.train.size + self.validation.size + self.test.size


@dataclass(frozen=True)
class DatasetStats:
    """Counts and a histogram over received (non-sentinel) RSSI values."""

    n_messages: int
    n_basestations: int
    n_received: int
    min_received: float | None
    max_received: float | None
    histogram_edges: np.ndarray  # length nbins + 1, empty when n_received == 0
    histogram_counts: np.ndarray

    def __post_init__(self):
        if int(self.histogram_counts.sum()) != self.n_received:
            raise InputError("histogram counts do not sum to n_received")


def _as_text(source):
    """Open `source` (path, text stream, or byte stream) as a text stream."""
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, io.TextIOBase):
        return _nonclosing(source)
    # bytes-like stream
    return _nonclosing(io.TextIOWrapper(source, encoding="utf-8", newline=""))


@contextmanager
def _nonclosing(stream):
    yield stream


def load_fingerprints(source, schema: CsvSchema = CsvSchema()) -> FingerprintSet:
    """Parse a fingerprint CSV into a :class:`FingerprintSet`.

    The header row is required. Rows whose coordinates or RSSI entries do not
    parse as reals, lie outside valid coordinate ranges, are positive, or fall
    below the sentinel are rejected with their 1-based file line number.
    """
    with _as_text(source) as stream:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset("no header row") from None
        header = [h.strip() for h in header]

        def col(name: str) -> int:
            try:
                return header.index(name)
            except ValueError:
                raise MissingColumn(name) from None

        lat_i = col(schema.lat_column)
        lon_i = col(schema.lon_column)
        if schema.rssi_columns is not None:
            rssi_names = list(schema.rssi_columns)
            rssi_idx = [col(name) for name in rssi_names]
        else:
            rssi_idx = [
                i
                for i, h in enumerate(header)
                if h.startswith(schema.rssi_prefix) and i not in (lat_i, lon_i)
            ]
            rssi_names = [header[i] for i in rssi_idx]
        if not rssi_idx:
            raise MissingColumn(f"{schema.rssi_prefix}* (no RSSI columns matched)")

        rssi_rows: list[list[float]] = []
        pos_rows: list[tuple[float, float]] = []
        for row in reader:
            line = reader.line_num
            if len(row) != len(header):
                raise MalformedRow(
                    line, f"expected {len(header)} fields, got {len(row)}"
                )

            def parse(value: str, what: str) -> float:
                text = value.strip()
                if not text:
                    raise MalformedRow(line, f"empty {what}")
                try:
                    out = float(text)
                except ValueError:
                    raise MalformedRow(line, f"unparsable {what}: {value!r}") from None
                if not math.isfinite(out):
                    raise MalformedRow(line, f"non-finite {what}: {value!r}")
                return out

            lat = parse(row[lat_i], "latitude")
            lon = parse(row[lon_i], "longitude")
            try:
                GeoPoint(lat, lon)
            except ValueError as exc:
                raise MalformedRow(line, str(exc)) from None
            values = []
            for i, name in zip(rssi_idx, rssi_names):
                v = parse(row[i], f"RSSI {name!r}")
                if v != schema.sentinel and v < schema.sentinel:
                    raise MalformedRow(
                        line, f"RSSI {name!r} below sentinel {schema.sentinel:g}: {v:g}"
                    )
                if v > 0.0:
                    raise MalformedRow(line, f"positive RSSI {name!r}: {v:g}")
                values.append(v)
            rssi_rows.append(values)
            pos_rows.append((lat, lon))

    if not rssi_rows:
        raise EmptyDataset("no data rows")
    return FingerprintSet(
        rssi=np.array(rssi_rows, dtype=np.float64),
        positions=np.array(pos_rows, dtype=np.float64),
        basestation_ids=tuple(rssi_names),
        sentinel=schema.sentinel,
    )


def save_fingerprints(fps: FingerprintSet, dest, schema: CsvSchema = CsvSchema()):
    """Write a fingerprint CSV that round-trips bit-exactly through `load`."""
    own = isinstance(dest, (str, Path))
    stream = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.writer(stream)
        writer.writerow(
            [schema.lat_column, schema.lon_column, *fps.basestation_ids]
        )
        for i in range(fps.n_messages):
            writer.writerow(
                [
                    repr(float(fps.positions[i, 0])),
                    repr(float(fps.positions[i, 1])),
                    *(repr(float(v)) for v in fps.rssi[i]),
                ]
            )
    finally:
        if own:
            stream.close()


def make_split(
    fps: FingerprintSet, ratios: tuple[float, float, float], seed: int
) -> SplitIndices:
    """Seeded random split into train/validation/test.

    Validation and test receive round(N * ratio) rows each, the remainder
    goes to train; the membership comes from one seeded shuffle of
    [0, N) followed by contiguous cuts, so a fixed seed is fully
    deterministic.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise BadRatios(f"ratios must be three positive numbers, got {ratios!r}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatios(f"ratios must sum to 1, got {sum(ratios)!r}")
    n = fps.n_messages
    n_val = math.floor(n * ratios[1] + 0.5)
    n_test = math.floor(n * ratios[2] + 0.5)
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise BadRatios(f"ratios {ratios!r} leave an empty subset for N={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return SplitIndices(
        train=perm[:n_train],
        validation=perm[n_train : n_train + n_val],
        test=perm[n_train + n_val :],
    )


_SUBSET_SYNONYMS = {
    "train": Subset.TRAIN,
    "training": Subset.TRAIN,
    "val": Subset.VALIDATION,
    "valid": Subset.VALIDATION,
    "validation": Subset.VALIDATION,
    "test": Subset.TEST,
    "testing": Subset.TEST,
}

_INDEX_HEADERS = ("index", "idx", "row", "row_id", "id", "message", "message_id")
_SUBSET_HEADERS = ("subset", "set", "split", "fold", "partition")


def load_split(source, n: int, *, synonyms: bool = False) -> SplitIndices:
    """Read a split file (CSV columns `index,subset`) for a dataset of n rows.

    With `synonyms=True` the header names and subset labels may use common
    variants (`idx`/`set`/`val`/`training`/...), which covers index-style
    published split artifacts.
    """
    with _as_text(source) as stream:
        reader = csv.reader(stream)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset("no header row") from None

        index_names = _INDEX_HEADERS if synonyms else ("index",)
        subset_names = _SUBSET_HEADERS if synonyms else ("subset",)
        index_i = next((header.index(h) for h in index_names if h in header), None)
        subset_i = next((header.index(h) for h in subset_names if h in header), None)
        if index_i is None:
            raise MissingColumn("index")
        if subset_i is None:
            raise MissingColumn("subset")

        seen: set[int] = set()
        parts: dict[Subset, list[int]] = {s: [] for s in Subset}
        for row in reader:
            line = reader.line_num
            if len(row) != len(header):
                raise MalformedRow(line, f"expected {len(header)} fields, got {len(row)}")
            try:
                index = int(row[index_i].strip())
            except ValueError:
                raise MalformedRow(line, f"unparsable index: {row[index_i]!r}") from None
            label = row[subset_i].strip().lower()
            if synonyms:
                subset = _SUBSET_SYNONYMS.get(label)
            else:
                subset = next((s for s in Subset if s.value == label), None)
            if subset is None:
                raise MalformedRow(line, f"unknown subset label: {row[subset_i]!r}")
            if not 0 <= index < n:
                raise IndexOutOfRange(index, n)
            if index in seen:
                raise DuplicateIndex(index)
            seen.add(index)
            parts[subset].append(index)

    for subset, rows in parts.items():
        if not rows:
            raise InvalidSplit(f"split file lists no {subset.value} rows")
    return SplitIndices(
        train=np.array(parts[Subset.TRAIN]),
        validation=np.array(parts[Subset.VALIDATION]),
        test=np.array(parts[Subset.TEST]),
    )


def save_split(split: SplitIndices, dest):
    """Write the canonical `index,subset` CSV, ordered by row index."""
    rows = []
    for subset in Subset:
        rows.extend((int(i), subset.value) for i in split.subset(subset))
    rows.sort()
    own = isinstance(dest, (str, Path))
    stream = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.writer(stream)
        writer.writerow(["index", "subset"])
        writer.writerows(rows)
    finally:
        if own:
            stream.close()


def load_index_list(source) -> np.ndarray:
    """Read a bare list of row indices: one integer per line, header optional."""
    with _as_text(source) as stream:
        values = []
        for line_no, raw in enumerate(stream, start=1):
            text = raw.strip().strip(",")
            if not text:
                continue
            try:
                values.append(int(float(text)))
            except ValueError:
                if line_no == 1:
                    continue  # tolerate a single-column header
                raise MalformedRow(line_no, f"unparsable index: {raw!r}") from None
    return np.array(values, dtype=np.int64)


def split_from_subset_indices(
    train: np.ndarray, validation: np.ndarray, test: np.ndarray, n: int
) -> SplitIndices:
    """Assemble a split from three index arrays, with range/duplicate checks."""
    merged = np.concatenate([train, validation, test])
    for index in merged:
        if not 0 <= index < n:
            raise IndexOutOfRange(int(index), n)
    unique, counts = np.unique(merged, return_counts=True)
    if np.any(counts > 1):
        raise DuplicateIndex(int(unique[counts > 1][0]))
    return SplitIndices(train=train, validation=validation, test=test)


def match_rows_to_indices(fps: FingerprintSet, source, schema: CsvSchema) -> np.ndarray:
    """Map full data rows from a subset CSV back to row indices of `fps`.

    Covers split artifacts that store copies of the dataset rows instead of
    indices. Rows are matched on exact parsed values (same float parser both
    sides); duplicated rows in the dataset are consumed in file order.
    """
    subset = load_fingerprints(source, schema)
    if subset.n_basestations != fps.n_basestations:
        raise InputError(
            f"subset file has {subset.n_basestations} RSSI columns, "
            f"dataset has {fps.n_basestations}"
        )
    pool: dict[bytes, deque[int]] = {}
    for i in range(fps.n_messages):
        key = np.concatenate([fps.positions[i], fps.rssi[i]]).tobytes()
        pool.setdefault(key, deque()).append(i)
    out = np.empty(subset.n_messages, dtype=np.int64)
    for j in range(subset.n_messages):
        key = np.concatenate([subset.positions[j], subset.rssi[j]]).tobytes()
        candidates = pool.get(key)
        if not candidates:
            raise InputError(
                f"subset row {j + 1} has no (remaining) matching dataset row"
            )
        out[j] = candidates.popleft()
    return out


def training_floor(fps: FingerprintSet, split: SplitIndices) -> float:
    """Detection floor: (minimum received RSSI among training rows) - 1 dBm.

    Reads training rows only; using validation or test rows here would leak
    information into preprocessing.
    """
    values = fps.rssi_rows(split.train)
    received = values[values != fps.sentinel]
    if received.size == 0:
        raise NoReceivedValues("training rows contain no received RSSI values")
    return float(received.min()) - 1.0


def stats(fps: FingerprintSet, bin_width: float = 1.0) -> DatasetStats:
    """Counts plus a histogram of received values; sentinels are excluded."""
    if not (bin_width > 0):
        raise InputError(f"bin_width must be positive, got {bin_width!r}")
    received = fps.rssi[fps.rssi != fps.sentinel]
    if received.size == 0:
        return DatasetStats(
            n_messages=fps.n_messages,
            n_basestations=fps.n_basestations,
            n_received=0,
            min_received=None,
            max_received=None,
            histogram_edges=np.empty(0),
            histogram_counts=np.empty(0, dtype=np.int64),
        )
    lo = math.floor(received.min() / bin_width) * bin_width
    span = float(received.max()) - lo
    nbins = max(1, math.ceil(span / bin_width)) if span > 0 else 1
    edges = lo + bin_width * np.arange(nbins + 1)
    counts, _ = np.histogram(received, bins=edges)
    return DatasetStats(
        n_messages=fps.n_messages,
        n_basestations=fps.n_basestations,
        n_received=int(received.size),
        min_received=float(received.min()),
        max_received=float(received.max()),
        histogram_edges=edges,
        histogram_counts=counts.astype(np.int64),
    )


def write_stats_csv(dataset_stats: DatasetStats, dest):
    """Histogram export: one `bin_low,bin_high,count` row per bin."""
    own = isinstance(dest, (str, Path))
    stream = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.writer(stream)
        writer.writerow(["bin_low", "bin_high", "count"])
        edges = dataset_stats.histogram_edges
        for i, count in enumerate(dataset_stats.histogram_counts):
            writer.writerow([f"{edges[i]:g}", f"{edges[i + 1]:g}", int(count)])
    finally:
        if own:
            stream.close()
