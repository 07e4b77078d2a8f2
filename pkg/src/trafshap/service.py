"""HTTP service exposing geometry, flows, predictions, attribution jobs,
glyphs, and fine-grained per-region views over an immutable snapshot."""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import attribution as attr
from . import flow as flow_mod
from . import predictor as pred_mod
from .flow import Channel
from .ingest import GridSpec, SnappedTrajectory, load_snapped
from .regions import RegionPartition, build_glyph
from .synth import load_intersections

DEFAULT_FUTURE_STEPS = 6
DEFAULT_TOP_K = 5


@dataclass
class Snapshot:
    """Immutable published dataset: everything the endpoints serve."""

    dataset_id: str
    grid: GridSpec
    partition: RegionPartition
    flows: dict[int, np.ndarray]           # slice k -> (2, M, N)
    index: flow_mod.CellTrajectoryIndex
    trajectories: dict[str, SnappedTrajectory]
    predictor: pred_mod.Predictor
    history_length: int = pred_mod.DEFAULT_HISTORY_LENGTH
    glyph_nsamples: int = 512
    glyph_seed: int = 7

    def __post_init__(self):
        self._glyph_cache: dict = {}
        ks = sorted(self.flows)
        self.background = pred_mod.mean_background(
            [self.flows[k] for k in ks], self.history_length)

    def window_slices(self, k: int) -> list[int]:
        slices = [k - self.history_length + 1 + tau for tau in range(self.history_length)]
        missing = [s for s in slices if s not in self.flows]
        if missing:
            raise KeyError(f"slices {missing} not in snapshot")
        return slices

    def window_at(self, k: int) -> np.ndarray:
        return pred_mod.as_window([self.flows[s] for s in self.window_slices(k)])


def build_snapshot(grid: GridSpec, partition: RegionPartition,
                   trajectories: list[SnappedTrajectory],
                   predictor: pred_mod.Predictor,
                   history_length: int = pred_mod.DEFAULT_HISTORY_LENGTH,
                   dataset_id: str = "default", **kwargs) -> Snapshot:
    slices = sorted({s for t in trajectories for s in t.slices()})
    flows: dict[int, np.ndarray] = {}
    indexes = []
    for k in slices:
        tensor, index = flow_mod.build_flow(trajectories, k, grid)
        flows[k] = tensor
        indexes.append(index)
    return Snapshot(dataset_id, grid, partition, flows,
                    flow_mod.merge_indexes(indexes),
                    {t.trajectory_id: t for t in trajectories},
                    predictor, history_length, **kwargs)


def load_snapshot(workspace: Path | str, dataset_id: str = "default") -> Snapshot:
    """Load a snapshot from a CLI workspace directory."""
    from .regions import build_partition  # late import to keep startup cheap
    import json

    ws = Path(workspace)
    grid = GridSpec.from_json((ws / "grid.json").read_text())
    config = json.loads((ws / "config.json").read_text()) if (ws / "config.json").exists() else {}
    trajectories = load_snapped(ws / "snapped.jsonl", grid)
    predictor = pred_mod.load_predictor(ws / "model" / "params.bin")
    points = load_intersections(ws / "intersections.csv")
    partition = build_partition(points, config.get("K", 21), grid,
                                seed=config.get("partition_seed", 0))
    return build_snapshot(grid, partition, trajectories, predictor,
                          history_length=config.get("history_length",
                                                    pred_mod.DEFAULT_HISTORY_LENGTH),
                          dataset_id=dataset_id)


@dataclass
class Job:
    id: str
    kind: str
    params: dict
    state: str = "queued"  # queued -> running -> done | failed
    error: str | None = None
    result: dict | None = None
    trajectory_scores: list = field(default_factory=list)
    trajectory_residual: float = 0.0
    window_slices: list[int] = field(default_factory=list)


class AttributionRequest(BaseModel):
    kind: str = "cell"
    cell: list[int] | None = None
    region_id: int | None = None
    channel: str = "in"
    horizon: int = 1
    grouping: str = "cell"
    nsamples: int = 4096
    seed: int = 7
    k: int = 0
    split_mode: str = "equal"


def _tensor_json(tensor: np.ndarray) -> dict:
    return {"dims": list(tensor.shape), "values": np.asarray(tensor).tolist()}


def create_app(snapshot: Snapshot | None = None, workers: int = 2,
               static_dir: Path | str | None = None) -> FastAPI:
    app = FastAPI(title="trafshap")
    app.state.snapshot = snapshot
    app.state.jobs: dict[str, Job] = {}
    app.state.jobs_lock = threading.Lock()
    app.state.executor = ThreadPoolExecutor(max_workers=workers)

    def snap() -> Snapshot:
        s = app.state.snapshot
        if s is None:
            raise HTTPException(503, "no snapshot published")
        return s

    @app.get("/api/geometry")
    def geometry(dataset: str | None = None):
        s = snap()
        if dataset is not None and dataset != s.dataset_id:
            raise HTTPException(404, f"unknown dataset {dataset!r}")
        import json
        return {
            "dataset_id": s.dataset_id,
            "grid": json.loads(s.grid.to_json()),
            "regions": s.partition.to_geojson(),
        }

    @app.get("/api/flows")
    def flows(k: int):
        s = snap()
        if k not in s.flows:
            raise HTTPException(400, f"slice {k} out of range")
        return {"k": k, **_tensor_json(s.flows[k])}

    @app.get("/api/predict")
    def predict(k: int, steps: int = DEFAULT_FUTURE_STEPS):
        s = snap()
        if steps < 1:
            raise HTTPException(400, "steps must be >= 1")
        try:
            window = s.window_at(k)
        except KeyError as e:
            raise HTTPException(400, str(e))
        preds = pred_mod.rollout(s.predictor, window, steps)
        return {"k": k, "steps": steps,
                "predictions": [_tensor_json(p) for p in preds]}

    def _run_job(job: Job):
        s = app.state.snapshot
        with app.state.jobs_lock:
            job.state = "running"
        try:
            p = job.params
            channel = Channel.from_label(p["channel"])
            target = attr.TargetSpec(
                kind=p["kind"], channel=channel, horizon=p["horizon"],
                cell=tuple(p["cell"]) if p.get("cell") else None,
                region_id=p.get("region_id"))
            window_slices = s.window_slices(p["k"])
            x = s.window_at(p["k"])
            if p["grouping"] == "region":
                n_groups = 2 * len(s.partition.region_ids) * s.history_length
            else:
                n_groups = 2 * s.grid.rows * s.grid.cols * s.history_length
            # requests below the estimator's floor are raised to it
            nsamples = max(p["nsamples"], 2 * n_groups + 2)
            result = attr.region_shap(
                x, s.background, s.predictor, target,
                grouping=p["grouping"], cell_region=s.partition.cell_region,
                nsamples=nsamples, seed=p["seed"])
            job.window_slices = window_slices
            job.result = result.as_dict()
            if p["grouping"] == "cell":
                tres = attr.trajectory_shap(result, s.index, window_slices,
                                            mode=p.get("split_mode", "equal"))
                job.trajectory_scores = tres.scores
                job.trajectory_residual = tres.residual
                job.result["trajectory_residual"] = tres.residual
                job.result["trajectory_count"] = len(tres.scores)
            with app.state.jobs_lock:
                job.state = "done"
        except Exception as e:  # failed jobs expose the message
            with app.state.jobs_lock:
                job.state = "failed"
                job.error = f"{type(e).__name__}: {e}"

    @app.post("/api/attribution")
    def submit(req: AttributionRequest):
        s = snap()
        try:
            s.window_slices(req.k)
        except KeyError as e:
            raise HTTPException(400, str(e))
        job = Job(id=uuid.uuid4().hex, kind=f"{req.grouping}_shap",
                  params=req.model_dump())
        with app.state.jobs_lock:
            app.state.jobs[job.id] = job
        app.state.executor.submit(_run_job, job)
        return {"job_id": job.id, "state": job.state}

    def _get_job(job_id: str) -> Job:
        with app.state.jobs_lock:
            job = app.state.jobs.get(job_id)
        if job is None:
            raise HTTPException(404, f"unknown job {job_id!r}")
        return job

    @app.get("/api/attribution/{job_id}")
    def job_status(job_id: str):
        job = _get_job(job_id)
        body = {"job_id": job.id, "kind": job.kind, "state": job.state,
                "params": job.params}
        if job.state == "done":
            body["result"] = job.result
        if job.state == "failed":
            body["error"] = job.error
        return body

    @app.get("/api/attribution/{job_id}/trajectories")
    def job_trajectories(job_id: str, k: int = DEFAULT_TOP_K):
        s = snap()
        job = _get_job(job_id)
        if job.state != "done":
            raise HTTPException(409, f"job is {job.state}")
        if not job.trajectory_scores and job.params["grouping"] != "cell":
            raise HTTPException(400, "job was not run with per-cell grouping")
        top = attr.top_k(job.trajectory_scores, k) if job.trajectory_scores else []
        out = []
        for score in top:
            traj = s.trajectories.get(score.trajectory_id)
            coords = traj.cell_center_path() if traj else []
            out.append({**score.as_dict(),
                        "coordinates": [[lon, lat] for lon, lat in coords]})
        return {"job_id": job.id, "k": k,
                "residual": job.trajectory_residual, "trajectories": out}

    @app.get("/api/glyphs")
    def glyphs(k: int, horizon: int = 2, channel: str = "in",
               steps: int = DEFAULT_FUTURE_STEPS):
        s = snap()
        ch = Channel.from_label(channel)
        cache_key = (k, horizon, channel, steps)
        if cache_key in s._glyph_cache:
            return s._glyph_cache[cache_key]
        try:
            window = s.window_at(k)
        except KeyError as e:
            raise HTTPException(400, str(e))
        preds = pred_mod.rollout(s.predictor, window, steps)
        current = s.flows[k].astype(float)
        payloads = []
        for rid in s.partition.region_ids:
            neighbor_phi = region_neighbor_phi(s, rid, k, horizon, ch)
            glyph = build_glyph(s.partition, rid, current, preds,
                                neighbor_phi, horizon, channel=int(ch))
            payloads.append(glyph.as_dict())
        body = {"k": k, "horizon": horizon, "channel": channel, "glyphs": payloads}
        s._glyph_cache[cache_key] = body
        return body

    @app.get("/api/region/{region_id}/grids")
    def region_grids(region_id: int, k: int, channel: str = "in",
                     steps: int = DEFAULT_FUTURE_STEPS):
        s = snap()
        if region_id not in s.partition.region_ids:
            raise HTTPException(404, f"unknown region {region_id}")
        ch = Channel.from_label(channel)
        try:
            window = s.window_at(k)
        except KeyError as e:
            raise HTTPException(400, str(e))
        preds = pred_mod.rollout(s.predictor, window, steps)
        cells = []
        # row-major over the region's member cells
        for i, j in sorted(map(tuple, s.partition.region_cells(region_id))):
            series = [float(s.flows[k][ch, i, j])] + [float(p[ch, i, j]) for p in preds]
            cells.append({
                "m": int(i), "n": int(j),
                "current": {"in": int(s.flows[k][0, i, j]),
                            "out": int(s.flows[k][1, i, j])},
                "series": series,
            })
        return {"region_id": region_id, "k": k, "channel": channel,
                "steps": steps, "cells": cells}

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app


def region_neighbor_phi(s: Snapshot, region_id: int, k: int, horizon: int,
                        channel: Channel) -> dict[int, float]:
    """Per-neighbor-region attribution for one region's predicted flow sum:
    region-grouped Shapley values summed over channel and history step."""
    target = attr.TargetSpec(kind="region", channel=channel, horizon=horizon,
                             region_id=region_id)
    p = 2 * len(s.partition.region_ids) * s.history_length
    result = attr.region_shap(
        s.window_at(k), s.background, s.predictor, target,
        grouping="region", cell_region=s.partition.cell_region,
        nsamples=max(s.glyph_nsamples, 2 * p + 2), seed=s.glyph_seed,
        estimator="sampled")
    phi: dict[int, float] = {}
    for key, value in zip(result.group_keys, result.phi):
        rid = int(key.split(":")[1].lstrip("r"))
        phi[rid] = phi.get(rid, 0.0) + float(value)
    return phi
