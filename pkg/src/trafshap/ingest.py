"""Trajectory ingestion: CSV parsing, grid snapping, time slicing."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple


class IngestError(Exception):
    pass


class ParseError(IngestError):
    """Malformed CSV row; carries the 1-based line number and offending field."""

    def __init__(self, line: int, field_name: str, message: str):
        super().__init__(f"line {line}, field '{field_name}': {message}")
        self.line = line
        self.field = field_name


@dataclass(frozen=True)
class GridSpec:
    """Geographic bounding box rasterized into rows x cols cells, with a
    fixed-duration time slicing of the epoch axis."""

    lon_min: float
    lon_max: float
    lat_min: float
    lat_max: float
    rows: int
    cols: int
    slice_seconds: float = 600.0
    epoch_origin: float = 0.0

    def __post_init__(self):
        if not (self.lon_min < self.lon_max):
            raise ValueError("lon_min must be < lon_max")
        if not (self.lat_min < self.lat_max):
            raise ValueError("lat_min must be < lat_max")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid dims must be >= 1")
        if self.slice_seconds <= 0:
            raise ValueError("slice_seconds must be > 0")

    def contains(self, lon: float, lat: float) -> bool:
        return (self.lon_min <= lon <= self.lon_max
                and self.lat_min <= lat <= self.lat_max)

    def cell_of(self, lon: float, lat: float) -> tuple[int, int]:
        """Cell (row, col) of a point inside the bbox.  Cells are half-open
        with the outer (max) edge closed, so the partition covers the bbox."""
        m = math.floor((lat - self.lat_min) / (self.lat_max - self.lat_min) * self.rows)
        n = math.floor((lon - self.lon_min) / (self.lon_max - self.lon_min) * self.cols)
        m = min(max(m, 0), self.rows - 1)
        n = min(max(n, 0), self.cols - 1)
        return m, n

    def cell_center(self, m: int, n: int) -> tuple[float, float]:
        """(lon, lat) of the geographic center of cell (m, n)."""
        dlat = (self.lat_max - self.lat_min) / self.rows
        dlon = (self.lon_max - self.lon_min) / self.cols
        return (self.lon_min + (n + 0.5) * dlon, self.lat_min + (m + 0.5) * dlat)

    def slice_of(self, timestamp: float) -> int:
        return math.floor((timestamp - self.epoch_origin) / self.slice_seconds)

    def to_json(self) -> str:
        return json.dumps({
            "lon_min": self.lon_min, "lon_max": self.lon_max,
            "lat_min": self.lat_min, "lat_max": self.lat_max,
            "rows": self.rows, "cols": self.cols,
            "slice_seconds": self.slice_seconds,
            "epoch_origin": self.epoch_origin,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GridSpec":
        return cls(**json.loads(text))


class RawTrajectoryRecord(NamedTuple):
    trajectory_id: str
    timestamp: float
    lon: float
    lat: float


class SnapSample(NamedTuple):
    slice_index: int
    row: int
    col: int
    timestamp: float


@dataclass
class SnappedTrajectory:
    trajectory_id: str
    grid: GridSpec
    samples: list[SnapSample]
    dropped_outside: int = 0

    def slices(self) -> set[int]:
        return {s.slice_index for s in self.samples}

    def cell_center_path(self) -> list[tuple[float, float]]:
        return [self.grid.cell_center(s.row, s.col) for s in self.samples]


DEFAULT_SCHEMA = {"id": 0, "timestamp": 1, "lon": 2, "lat": 3}


@dataclass
class ParseResult:
    trajectories: dict[str, list[RawTrajectoryRecord]] = field(default_factory=dict)
    duplicate_count: int = 0


def parse_trajectories(stream: Iterable[str] | io.IOBase | bytes | str,
                       schema: dict[str, int] | None = None,
                       delimiter: str = ",") -> ParseResult:
    """Parse a CSV stream into records grouped by trajectory id.

    Each group comes out sorted by timestamp.  Duplicate (id, timestamp)
    pairs keep the first occurrence; the number dropped is reported in the
    result.  A malformed row raises ParseError with its 1-based line number.
    """
    schema = dict(DEFAULT_SCHEMA if schema is None else schema)
    if isinstance(stream, bytes):
        stream = io.StringIO(stream.decode("utf-8"))
    elif isinstance(stream, str):
        stream = io.StringIO(stream)

    groups: dict[str, list[RawTrajectoryRecord]] = {}
    reader = csv.reader(stream, delimiter=delimiter)
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        needed = max(schema.values())
        if len(row) <= needed:
            raise ParseError(lineno, "row", f"expected >= {needed + 1} columns, got {len(row)}")
        tid = row[schema["id"]].strip()
        if not tid:
            raise ParseError(lineno, "id", "empty trajectory id")
        rec_vals = {}
        for name in ("timestamp", "lon", "lat"):
            raw = row[schema[name]].strip()
            try:
                rec_vals[name] = float(raw)
            except ValueError:
                raise ParseError(lineno, name, f"not a number: {raw!r}") from None
            if not math.isfinite(rec_vals[name]):
                raise ParseError(lineno, name, f"non-finite value: {raw!r}")
        groups.setdefault(tid, []).append(
            RawTrajectoryRecord(tid, rec_vals["timestamp"], rec_vals["lon"], rec_vals["lat"]))

    result = ParseResult()
    for tid, records in groups.items():
        records.sort(key=lambda r: r.timestamp)
        deduped: list[RawTrajectoryRecord] = []
        seen_ts: set[float] = set()
        for r in records:
            if r.timestamp in seen_ts:
                result.duplicate_count += 1
                continue
            seen_ts.add(r.timestamp)
            deduped.append(r)
        result.trajectories[tid] = deduped
    return result


def snap(records: list[RawTrajectoryRecord], grid: GridSpec) -> SnappedTrajectory:
    """Snap one trajectory's records to grid cells and time slices.

    Out-of-bbox points are dropped and counted; a trajectory with every
    point outside the bbox is an error.
    """
    if not records:
        raise IngestError("cannot snap an empty trajectory")
    tid = records[0].trajectory_id
    samples: list[SnapSample] = []
    dropped = 0
    for r in records:
        if not grid.contains(r.lon, r.lat):
            dropped += 1
            continue
        m, n = grid.cell_of(r.lon, r.lat)
        samples.append(SnapSample(grid.slice_of(r.timestamp), m, n, r.timestamp))
    if not samples:
        raise IngestError(f"trajectory {tid!r} fully outside grid")
    samples.sort(key=lambda s: s.timestamp)
    return SnappedTrajectory(tid, grid, samples, dropped)


def snap_all(parsed: ParseResult, grid: GridSpec) -> tuple[list[SnappedTrajectory], int]:
    """Snap every parsed trajectory; fully-outside trajectories are skipped
    and counted together with individual dropped points."""
    out: list[SnappedTrajectory] = []
    dropped = 0
    for records in parsed.trajectories.values():
        try:
            st = snap(records, grid)
        except IngestError:
            dropped += len(records)
            continue
        dropped += st.dropped_outside
        out.append(st)
    return out, dropped


def save_snapped(trajectories: list[SnappedTrajectory], path) -> None:
    """Persist snapped trajectories as JSON lines (sorted by id)."""
    with open(path, "w", encoding="utf-8") as f:
        for t in sorted(trajectories, key=lambda t: t.trajectory_id):
            f.write(json.dumps({
                "id": t.trajectory_id,
                "samples": [[s.slice_index, s.row, s.col, s.timestamp] for s in t.samples],
            }, sort_keys=True) + "\n")


def load_snapped(path, grid: GridSpec) -> list[SnappedTrajectory]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            samples = [SnapSample(int(k), int(m), int(n), float(ts))
                       for k, m, n, ts in obj["samples"]]
            out.append(SnappedTrajectory(obj["id"], grid, samples))
    return out
