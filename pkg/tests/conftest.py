import numpy as np
import pytest

from trafshap.ingest import GridSpec, SnappedTrajectory, SnapSample


@pytest.fixture
def unit_grid():
    return GridSpec(0, 10, 0, 10, 10, 10, slice_seconds=600, epoch_origin=0)


def make_traj(grid, tid, cells, k=0, t0=None):
    """Snapped trajectory visiting the given (row, col) cells inside slice k."""
    slice_start = grid.epoch_origin + k * grid.slice_seconds
    dt = grid.slice_seconds / (len(cells) + 1)
    samples = [SnapSample(k, m, n, slice_start + (i + 0.5) * dt)
               for i, (m, n) in enumerate(cells)]
    return SnappedTrajectory(tid, grid, samples)


def random_trajectories(grid, n, rng, max_len=8):
    """Random-walk trajectories across cells and slices for oracle tests."""
    trajs = []
    for t in range(n):
        length = int(rng.integers(2, max_len + 1))
        m = int(rng.integers(grid.rows))
        c = int(rng.integers(grid.cols))
        ts = float(rng.uniform(0, 3 * grid.slice_seconds))
        samples = []
        for _ in range(length):
            k = grid.slice_of(ts)
            samples.append(SnapSample(k, m, c, ts))
            m = int(np.clip(m + rng.integers(-1, 2), 0, grid.rows - 1))
            c = int(np.clip(c + rng.integers(-1, 2), 0, grid.cols - 1))
            ts += float(rng.uniform(1, grid.slice_seconds / 2))
        trajs.append(SnappedTrajectory(f"t{t}", grid, samples))
    return trajs


def brute_force_flow(trajs, grid, k):
    """Independent recount straight from the per-cell counting definitions:
    for every cell, scan every trajectory's consecutive sample pairs."""
    tensor = np.zeros((2, grid.rows, grid.cols), dtype=np.int64)
    for i in range(grid.rows):
        for j in range(grid.cols):
            for traj in trajs:
                for prev, cur in zip(traj.samples, traj.samples[1:]):
                    if cur.slice_index != k:
                        continue
                    if (prev.row, prev.col) != (i, j) and (cur.row, cur.col) == (i, j):
                        tensor[0, i, j] += 1
                    if (prev.row, prev.col) == (i, j) and (cur.row, cur.col) != (i, j):
                        tensor[1, i, j] += 1
    return tensor
