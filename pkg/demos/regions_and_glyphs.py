"""Cluster synthetic intersections into regions, sweep K to pick the
region count, and assemble a radar glyph payload for one region."""

import numpy as np

from trafshap.ingest import GridSpec
from trafshap.regions import (build_glyph, build_partition, kselect_sweep)

rng = np.random.default_rng(3)
grid = GridSpec(0, 100, 0, 100, 10, 10, slice_seconds=600)
points = rng.uniform(0, 100, size=(200, 2))

rows = kselect_sweep(points, 1, 26, seed=11)
print(" K  within-cluster SSE")
for row in rows:
    if row["K"] in (1, 2, 5, 10, 17, 21, 26):
        print(f"{row['K']:>3}  {row['sse']:>12.1f}")
stable = [r["K"] for r in rows if r["sse"] < 0.10 * rows[1]["sse"]]
print(f"SSE settles below 10% of K=2 from K={min(stable)} on")

K = 21
partition = build_partition(points, K, grid, seed=11)
sizes = np.bincount(partition.cell_region.ravel(), minlength=K)
print(f"\n{K} regions; grid cells per region: min {sizes.min()}, "
      f"max {sizes.max()}")
rid = int(np.argmax(sizes))
print(f"region {rid} touches regions {sorted(partition.adjacency[rid])}")

# a glyph for the largest region: fabricated flows and neighbor phi
current = rng.poisson(5.0, size=(2, 10, 10)).astype(float)
predictions = [current * 1.1, current * 1.2]
neighbor_phi = {other: float(rng.normal()) for other in partition.region_ids}
glyph = build_glyph(partition, rid, current, predictions, neighbor_phi,
                    selected_horizon=2)
print(f"\nglyph series (current + 2 steps): "
      f"{[round(v, 1) for v in glyph.predicted_series]}")
compass = ["N", "NE", "E", "SE", "S", "SW", "W", "NW"]
for name, sector in zip(compass, glyph.sectors):
    print(f"  {name:>2}: +{sector['positive_sum']:.2f} "
          f"-{sector['negative_sum']:.2f}")
