"""In/out-flow tensors per time slice, with a per-trajectory decomposition
and the cell->trajectory index used by trajectory attribution."""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ingest import GridSpec, SnappedTrajectory


class Channel(enum.IntEnum):
    IN = 0
    OUT = 1

    @property
    def label(self) -> str:
        return "in" if self is Channel.IN else "out"

    @classmethod
    def from_label(cls, label: str) -> "Channel":
        try:
            return {"in": cls.IN, "out": cls.OUT}[label.lower()]
        except KeyError:
            raise ValueError(f"unknown channel {label!r}") from None


@dataclass
class TrajectoryFlowTensor:
    """Sparse per-trajectory in/out transition counts for one time slice."""

    trajectory_id: str
    slice_index: int
    counts: dict[tuple[Channel, int, int], int] = field(default_factory=dict)

    def _bump(self, channel: Channel, m: int, n: int) -> None:
        key = (channel, m, n)
        self.counts[key] = self.counts.get(key, 0) + 1


# index key: (channel, row, col, slice) -> list of (trajectory_id, count)
CellTrajectoryIndex = dict[tuple[Channel, int, int, int], list[tuple[str, int]]]


def transitions(traj: SnappedTrajectory, k: int) -> TrajectoryFlowTensor:
    """Count one trajectory's cell entries/exits attributed to slice k.

    A consecutive sample pair crossing from cell a to cell b adds one
    out-count at a and one in-count at b; both are attributed to the slice
    of the arriving sample.  Same-cell pairs contribute nothing.
    """
    t = TrajectoryFlowTensor(traj.trajectory_id, k)
    for prev, cur in zip(traj.samples, traj.samples[1:]):
        if cur.slice_index != k:
            continue
        if (prev.row, prev.col) == (cur.row, cur.col):
            continue
        t._bump(Channel.OUT, prev.row, prev.col)
        t._bump(Channel.IN, cur.row, cur.col)
    return t


def build_flow(trajs: list[SnappedTrajectory], k: int,
               grid: GridSpec | None = None) -> tuple[np.ndarray, CellTrajectoryIndex]:
    """Sum per-trajectory transition tensors into the dense (2, M, N)
    flow tensor for slice k, and build the cell->trajectory index."""
    if grid is None:
        if not trajs:
            raise ValueError("need a GridSpec when the trajectory set is empty")
        grid = trajs[0].grid
    for t in trajs:
        if t.grid != grid:
            raise ValueError(f"trajectory {t.trajectory_id!r} snapped on a different GridSpec")

    tensor = np.zeros((2, grid.rows, grid.cols), dtype=np.int32)
    index: CellTrajectoryIndex = {}
    for traj in trajs:
        tft = transitions(traj, k)
        for (c, m, n), count in tft.counts.items():
            tensor[c, m, n] += count
            index.setdefault((c, m, n, k), []).append((traj.trajectory_id, count))
    return tensor, index


def save_flow_tensor(tensor: np.ndarray, k: int, path: Path | str) -> None:
    """Little-endian int32, row-major [channel][row][col], with a JSON
    sidecar {k, M, N, checksum} next to it."""
    path = Path(path)
    data = np.ascontiguousarray(tensor, dtype="<i4").tobytes()
    path.write_bytes(data)
    sidecar = {
        "k": k,
        "M": int(tensor.shape[1]),
        "N": int(tensor.shape[2]),
        "checksum": hashlib.sha256(data).hexdigest(),
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True))


def load_flow_tensor(path: Path | str) -> tuple[np.ndarray, int]:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    data = path.read_bytes()
    if hashlib.sha256(data).hexdigest() != sidecar["checksum"]:
        raise ValueError(f"checksum mismatch for {path}")
    tensor = np.frombuffer(data, dtype="<i4").reshape(2, sidecar["M"], sidecar["N"])
    return tensor.astype(np.int32), int(sidecar["k"])


def save_index(index: CellTrajectoryIndex, path: Path | str) -> None:
    """Persist the cell->trajectory index as JSON lines."""
    with open(path, "w", encoding="utf-8") as f:
        for (c, m, n, k) in sorted(index, key=lambda t: (t[3], t[0], t[1], t[2])):
            entries = sorted(index[(c, m, n, k)])
            f.write(json.dumps({
                "channel": Channel(c).label, "m": m, "n": n, "k": k,
                "trajectories": [[tid, cnt] for tid, cnt in entries],
            }, sort_keys=True) + "\n")


def load_index(path: Path | str) -> CellTrajectoryIndex:
    index: CellTrajectoryIndex = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            key = (Channel.from_label(obj["channel"]), obj["m"], obj["n"], obj["k"])
            index[key] = [(tid, int(cnt)) for tid, cnt in obj["trajectories"]]
    return index


def merge_indexes(indexes: list[CellTrajectoryIndex]) -> CellTrajectoryIndex:
    merged: CellTrajectoryIndex = {}
    for idx in indexes:
        for key, entries in idx.items():
            merged.setdefault(key, []).extend(entries)
    return merged
