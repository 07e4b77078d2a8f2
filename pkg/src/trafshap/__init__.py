"""Grid traffic flow tensors, pluggable predictors, and Shapley-based
region/trajectory attribution."""

from .attribution import (AttributionResult, TargetSpec, TrajectoryScore,
                          region_shap, shapley_exact, shapley_sampled,
                          time_channel_aggregate, top_k, trajectory_shap)
from .flow import Channel, build_flow, transitions
from .ingest import GridSpec, SnappedTrajectory, parse_trajectories, snap
from .predictor import (HistoricalAveragePredictor, LinearPredictor,
                        fit_linear, rollout)
from .regions import (RegionPartition, build_glyph, build_partition, kmeans,
                      merge_regions, variance_diagnostic, voronoi_cells)
from .synth import ODPattern, Scenario, generate

__all__ = [
    "AttributionResult", "Channel", "GridSpec", "HistoricalAveragePredictor",
    "LinearPredictor", "ODPattern", "RegionPartition", "Scenario",
    "SnappedTrajectory", "TargetSpec", "TrajectoryScore", "build_flow",
    "build_glyph", "build_partition", "fit_linear", "generate", "kmeans",
    "merge_regions", "parse_trajectories", "region_shap", "rollout",
    "shapley_exact", "shapley_sampled", "snap", "time_channel_aggregate",
    "top_k", "trajectory_shap", "transitions", "variance_diagnostic",
    "voronoi_cells",
]
