"""Regional aggregation: K-means over intersections, bounded Voronoi
cells, merged region polygons, the K-selection variance diagnostic, and
radar-glyph payload assembly."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import Point, Polygon, box
from shapely.ops import unary_union

from .ingest import GridSpec


@dataclass
class Clustering:
    K: int
    assignment: np.ndarray  # (n,) cluster index per intersection
    centroids: np.ndarray   # (K, 2) lon/lat

    def counts(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.K)


def kmeans(points: np.ndarray, K: int, seed: int = 0,
           max_iter: int = 500) -> Clustering:
    """Lloyd's algorithm with k-means++ seeding; terminates when no point
    is reassigned.  Empty clusters steal the farthest point from the
    largest cluster."""
    points = np.asarray(points, dtype=float)
    n_distinct = len(np.unique(points, axis=0))
    if K < 1:
        raise ValueError("K must be >= 1")
    if K > n_distinct:
        raise ValueError(f"K={K} exceeds the {n_distinct} distinct points")

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(points, K, rng)
    assignment = np.full(len(points), -1)
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assignment = d2.argmin(axis=1)
        for c in range(K):
            if not np.any(new_assignment == c):
                largest = np.bincount(new_assignment, minlength=K).argmax()
                members = np.flatnonzero(new_assignment == largest)
                farthest = members[d2[members, largest].argmax()]
                new_assignment[farthest] = c
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for c in range(K):
            centroids[c] = points[assignment == c].mean(axis=0)
    return Clustering(K, assignment, centroids)


def _kmeanspp_init(points: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    centroids = [points[rng.integers(len(points))]]
    while len(centroids) < K:
        d2 = np.min(((points[:, None, :] - np.array(centroids)[None, :, :]) ** 2)
                    .sum(axis=2), axis=1)
        total = d2.sum()
        if total <= 0:
            # remaining mass is on duplicate points; pick any unused point
            probs = np.full(len(points), 1.0 / len(points))
        else:
            probs = d2 / total
        centroids.append(points[rng.choice(len(points), p=probs)])
    return np.array(centroids, dtype=float)


def variance_diagnostic(clustering: Clustering) -> float:
    """Population variance of the per-cluster intersection counts."""
    counts = clustering.counts().astype(float)
    return float(((counts.mean() - counts) ** 2).mean())


def within_cluster_sse(points: np.ndarray, clustering: Clustering) -> float:
    points = np.asarray(points, dtype=float)
    d2 = ((points - clustering.centroids[clustering.assignment]) ** 2).sum(axis=1)
    return float(d2.sum())


def kselect_sweep(points: np.ndarray, kmin: int, kmax: int,
                  seed: int = 0) -> list[dict]:
    """Count-balance variance (and within-cluster SSE) for each K."""
    rows = []
    for K in range(kmin, kmax + 1):
        clustering = kmeans(points, K, seed=seed)
        rows.append({
            "K": K,
            "sigma2": variance_diagnostic(clustering),
            "sse": within_cluster_sse(points, clustering),
        })
    return rows


def voronoi_cells(points: np.ndarray, bbox: tuple[float, float, float, float]
                  ) -> list[Polygon]:
    """Bbox-clipped Voronoi polygon per generator, by half-plane clipping.

    bbox is (lon_min, lat_min, lon_max, lat_max).  Duplicate generators
    share identical polygons.  O(n^2) worst case but each cell clips only
    against generators that can still cut it.
    """
    points = np.asarray(points, dtype=float)
    if len(points) == 0:
        raise ValueError("need at least one generator")
    bbox_poly = box(*bbox)
    diag = math.hypot(bbox[2] - bbox[0], bbox[3] - bbox[1])

    distinct, inverse = np.unique(points, axis=0, return_inverse=True)
    cells: list[Polygon] = []
    for i, pi in enumerate(distinct):
        cell = bbox_poly
        order = np.argsort(((distinct - pi) ** 2).sum(axis=1))
        for j in order:
            if j == i:
                continue
            pj = distinct[j]
            half_dist = math.hypot(*(pj - pi)) / 2.0
            # generators beyond twice the current cell radius cannot cut it
            radius = max(Point(pi).distance(Point(v)) for v in cell.exterior.coords)
            if half_dist > radius:
                break
            cell = cell.intersection(_half_plane(pi, pj, diag))
            if cell.is_empty:
                break
        cells.append(cell)
    return [cells[idx] for idx in inverse]


def _half_plane(pi: np.ndarray, pj: np.ndarray, extent: float) -> Polygon:
    """Rectangle covering the side of the pi/pj bisector that contains pi."""
    mid = (pi + pj) / 2.0
    n = pi - pj
    n = n / np.linalg.norm(n)
    t = np.array([-n[1], n[0]])
    d = extent * 4.0
    corners = [mid + t * d, mid - t * d, mid - t * d + n * 2 * d, mid + t * d + n * 2 * d]
    return Polygon([tuple(c) for c in corners])


@dataclass
class RegionPartition:
    """Merged Voronoi polygons per cluster with the grid-cell mapping."""

    grid: GridSpec
    clustering: Clustering
    polygons: list  # shapely Polygon or MultiPolygon per region
    cell_region: np.ndarray  # (M, N) region id per grid cell
    adjacency: dict[int, set[int]]

    @property
    def region_ids(self) -> list[int]:
        return list(range(len(self.polygons)))

    def centroid(self, region_id: int) -> tuple[float, float]:
        c = self.polygons[region_id].centroid
        return (c.x, c.y)

    def region_cells(self, region_id: int) -> np.ndarray:
        return np.argwhere(self.cell_region == region_id)

    def to_geojson(self) -> dict:
        features = []
        for rid, poly in enumerate(self.polygons):
            members = [int(i) for i in np.flatnonzero(self.clustering.assignment == rid)]
            features.append({
                "type": "Feature",
                "geometry": poly.__geo_interface__,
                "properties": {
                    "region_id": rid,
                    "intersections": members,
                    "adjacent": sorted(self.adjacency.get(rid, set())),
                },
            })
        return {"type": "FeatureCollection", "features": features}


def merge_regions(cells: list[Polygon], clustering: Clustering,
                  grid: GridSpec) -> RegionPartition:
    """Union member Voronoi cells per cluster, map grid cells to regions by
    centroid containment, and derive region adjacency from shared borders."""
    if len(cells) != len(clustering.assignment):
        raise ValueError("Voronoi cells and clustering cover different intersections")
    polygons = []
    for rid in range(clustering.K):
        members = [cells[i] for i in np.flatnonzero(clustering.assignment == rid)]
        polygons.append(unary_union(members))

    cell_region = np.zeros((grid.rows, grid.cols), dtype=int)
    for m in range(grid.rows):
        for n in range(grid.cols):
            lon, lat = grid.cell_center(m, n)
            pt = Point(lon, lat)
            hit = [rid for rid, poly in enumerate(polygons) if poly.covers(pt)]
            if hit:
                cell_region[m, n] = hit[0]
            else:
                dists = [poly.distance(pt) for poly in polygons]
                cell_region[m, n] = int(np.argmin(dists))

    adjacency: dict[int, set[int]] = {rid: set() for rid in range(clustering.K)}
    for a in range(clustering.K):
        for b in range(a + 1, clustering.K):
            shared = polygons[a].boundary.intersection(polygons[b].boundary)
            if shared.length > 1e-12:
                adjacency[a].add(b)
                adjacency[b].add(a)
    return RegionPartition(grid, clustering, polygons, cell_region, adjacency)


def build_partition(points: np.ndarray, K: int, grid: GridSpec,
                    seed: int = 0) -> RegionPartition:
    clustering = kmeans(points, K, seed=seed)
    cells = voronoi_cells(points, (grid.lon_min, grid.lat_min, grid.lon_max, grid.lat_max))
    return merge_regions(cells, clustering, grid)


def save_partition_geojson(partition: RegionPartition, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(partition.to_geojson(), f, sort_keys=True)


N_SECTORS = 8


def bearing_deg(origin: tuple[float, float], dest: tuple[float, float]) -> float:
    """Compass bearing (0 = north, clockwise) on a local equirectangular
    approximation; fine at city extents."""
    lon0, lat0 = origin
    lon1, lat1 = dest
    mean_lat = math.radians((lat0 + lat1) / 2.0)
    x = (lon1 - lon0) * math.cos(mean_lat)
    y = lat1 - lat0
    return math.degrees(math.atan2(x, y)) % 360.0


def sector_of(bearing: float, n_sectors: int = N_SECTORS) -> int:
    width = 360.0 / n_sectors
    return int(((bearing + width / 2.0) % 360.0) // width)


@dataclass
class RadarGlyphPayload:
    region_id: int
    predicted_series: list[float]  # current value + future horizon steps
    selected_horizon: int
    sectors: list[dict] = field(default_factory=list)  # {positive_sum, negative_sum}

    def as_dict(self) -> dict:
        return {
            "region_id": self.region_id,
            "predicted_series": self.predicted_series,
            "selected_horizon": self.selected_horizon,
            "sectors": self.sectors,
        }


def build_glyph(partition: RegionPartition, region_id: int,
                current: np.ndarray, predictions: list[np.ndarray],
                neighbor_phi: dict[int, float], selected_horizon: int,
                channel: int = 0, n_sectors: int = N_SECTORS) -> RadarGlyphPayload:
    """Glyph payload: the region's summed flow series (current + each
    rollout step) and neighbor attribution binned into compass sectors by
    centroid-to-centroid bearing, positives and negatives kept apart."""
    if region_id not in partition.region_ids:
        raise KeyError(f"unknown region {region_id}")
    cells = partition.region_cells(region_id)
    series = [float(sum(current[channel, i, j] for i, j in cells))]
    for pred in predictions:
        series.append(float(sum(pred[channel, i, j] for i, j in cells)))

    sectors = [{"positive_sum": 0.0, "negative_sum": 0.0} for _ in range(n_sectors)]
    origin = partition.centroid(region_id)
    for rid, phi in neighbor_phi.items():
        if rid == region_id:
            continue
        s = sector_of(bearing_deg(origin, partition.centroid(rid)), n_sectors)
        if phi >= 0:
            sectors[s]["positive_sum"] += float(phi)
        else:
            sectors[s]["negative_sum"] += float(-phi)
    return RadarGlyphPayload(region_id, series, selected_horizon, sectors)
