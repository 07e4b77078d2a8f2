"""Synthetic scenarios: seeded intersections and trajectory populations
with known origin-destination surges, emitted in the ingest CSV format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ingest import GridSpec


@dataclass(frozen=True)
class ODPattern:
    origin: tuple[int, int]       # (row, col)
    destination: tuple[int, int]
    rate: float                   # Poisson departures per slice
    label: str = ""
    start_slice: int = 0
    end_slice: int | None = None  # exclusive; None = whole duration

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be >= 0")


@dataclass
class Scenario:
    grid: GridSpec
    od_patterns: list[ODPattern]
    duration_slices: int
    seed: int = 0
    n_intersections: int = 0
    layout_seed: int = 0

    def validate(self):
        for od in self.od_patterns:
            for m, n in (od.origin, od.destination):
                if not (0 <= m < self.grid.rows and 0 <= n < self.grid.cols):
                    raise ValueError(f"OD cell ({m},{n}) outside grid")

    def to_json(self) -> str:
        return json.dumps({
            "grid": json.loads(self.grid.to_json()),
            "od_patterns": [{
                "origin": list(od.origin), "destination": list(od.destination),
                "rate": od.rate, "label": od.label,
                "start_slice": od.start_slice, "end_slice": od.end_slice,
            } for od in self.od_patterns],
            "duration_slices": self.duration_slices,
            "seed": self.seed,
            "n_intersections": self.n_intersections,
            "layout_seed": self.layout_seed,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        obj = json.loads(text)
        return cls(
            grid=GridSpec(**obj["grid"]),
            od_patterns=[ODPattern(tuple(o["origin"]), tuple(o["destination"]),
                                   o["rate"], o.get("label", ""),
                                   o.get("start_slice", 0), o.get("end_slice"))
                         for o in obj["od_patterns"]],
            duration_slices=obj["duration_slices"],
            seed=obj.get("seed", 0),
            n_intersections=obj.get("n_intersections", 0),
            layout_seed=obj.get("layout_seed", 0),
        )


def rectilinear_path(origin: tuple[int, int], dest: tuple[int, int]
                     ) -> list[tuple[int, int]]:
    """Row-then-column cell sequence from origin to destination."""
    m0, n0 = origin
    m1, n1 = dest
    path = [(m0, n0)]
    step = 1 if m1 >= m0 else -1
    for m in range(m0 + step, m1 + step, step):
        path.append((m, n0))
    step = 1 if n1 >= n0 else -1
    for n in range(n0 + step, n1 + step, step):
        path.append((m1, n))
    return path


@dataclass
class SynthOutput:
    intersections: np.ndarray           # (n, 2) lon/lat
    records: list[tuple[str, float, float, float]]  # (id, ts, lon, lat) rows
    manifest: dict                      # OD label -> list of trajectory ids


def generate(scenario: Scenario) -> SynthOutput:
    """Seeded Poisson departures per OD per slice.  Each trajectory emits
    one sample per traversed cell (at the cell center), with timestamps
    evenly spaced inside its departure slice, so the whole path falls in
    one slice."""
    scenario.validate()
    grid = scenario.grid

    layout_rng = np.random.default_rng([scenario.layout_seed, 1])
    n_pts = scenario.n_intersections
    intersections = np.column_stack([
        layout_rng.uniform(grid.lon_min, grid.lon_max, n_pts),
        layout_rng.uniform(grid.lat_min, grid.lat_max, n_pts),
    ]) if n_pts else np.zeros((0, 2))

    records: list[tuple[str, float, float, float]] = []
    manifest: dict[str, list[str]] = {}
    for od_idx, od in enumerate(scenario.od_patterns):
        rng = np.random.default_rng([scenario.seed, od_idx])
        label = od.label or f"od{od_idx}"
        ids = manifest.setdefault(label, [])
        path = rectilinear_path(od.origin, od.destination)
        end = scenario.duration_slices if od.end_slice is None else od.end_slice
        for k in range(scenario.duration_slices):
            active = od.start_slice <= k < end
            n_dep = int(rng.poisson(od.rate)) if active else 0
            for j in range(n_dep):
                tid = f"od{od_idx}_k{k}_{j}"
                ids.append(tid)
                slice_start = grid.epoch_origin + k * grid.slice_seconds
                dt = grid.slice_seconds / len(path)
                for step, (m, n) in enumerate(path):
                    ts = slice_start + (step + 0.5) * dt
                    lon, lat = grid.cell_center(m, n)
                    records.append((tid, ts, lon, lat))
    return SynthOutput(intersections, records, manifest)


def write_outputs(output: SynthOutput, out_dir: Path | str) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "trajectories.csv", "w", encoding="utf-8") as f:
        for tid, ts, lon, lat in output.records:
            f.write(f"{tid},{float(ts)!r},{float(lon)!r},{float(lat)!r}\n")
    with open(out_dir / "intersections.csv", "w", encoding="utf-8") as f:
        for lon, lat in output.intersections:
            f.write(f"{float(lon)!r},{float(lat)!r}\n")
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(output.manifest, f, sort_keys=True)


def load_intersections(path: Path | str) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                lon, lat = line.strip().split(",")
                rows.append((float(lon), float(lat)))
    return np.array(rows)
