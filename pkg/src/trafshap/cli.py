"""Batch entry points composing the pipeline over a workspace directory.

Each stage writes its artifacts into the workspace plus a RunManifest
under workspace/manifests/, from which `replay` reproduces the stage
byte-for-byte in another workspace.
"""

from __future__ import annotations

import json
import os
import time
from importlib.metadata import version as pkg_version
from pathlib import Path

import click
import numpy as np

from . import attribution as attr
from . import flow as flow_mod
from . import predictor as pred_mod
from .flow import Channel
from .ingest import GridSpec, parse_trajectories, snap_all, save_snapped, load_snapped
from .regions import build_partition, kselect_sweep, save_partition_geojson
from .synth import Scenario, generate, write_outputs, load_intersections


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_manifest(ws: Path, command: str, flags: dict, outputs: list[str],
                    started: float) -> None:
    manifest = {
        "command": command,
        "flags": flags,
        "outputs": sorted(outputs),
        "wall_time_s": round(time.time() - started, 3),
        "versions": {"trafshap": pkg_version("trafshap"), "numpy": np.__version__},
    }
    mdir = ws / "manifests"
    mdir.mkdir(parents=True, exist_ok=True)
    _atomic_write(mdir / f"{command}.json", json.dumps(manifest, sort_keys=True, indent=1))


def _update_config(ws: Path, **entries) -> dict:
    path = ws / "config.json"
    config = json.loads(path.read_text()) if path.exists() else {}
    config.update(entries)
    _atomic_write(path, json.dumps(config, sort_keys=True))
    return config


def _load_config(ws: Path) -> dict:
    path = ws / "config.json"
    return json.loads(path.read_text()) if path.exists() else {}


def run_synth(ws: Path, scenario: str) -> list[str]:
    sc = Scenario.from_json(Path(scenario).read_text())
    out = generate(sc)
    write_outputs(out, ws)
    _atomic_write(ws / "grid.json", sc.grid.to_json())
    return ["trajectories.csv", "intersections.csv", "manifest.json", "grid.json"]


def run_ingest(ws: Path, input_file: str, grid: str, slice_seconds: float,
               bbox: str | None) -> list[str]:
    grid_path = ws / "grid.json"
    if grid_path.exists():
        spec = GridSpec.from_json(grid_path.read_text())
    else:
        if bbox is None:
            raise click.ClickException("no grid.json in workspace; --bbox is required")
        rows, cols = (int(x) for x in grid.lower().split("x"))
        lon0, lat0, lon1, lat1 = (float(x) for x in bbox.split(","))
        spec = GridSpec(lon0, lon1, lat0, lat1, rows, cols, slice_seconds)
        _atomic_write(grid_path, spec.to_json())
    with open(ws / input_file, encoding="utf-8") as f:
        parsed = parse_trajectories(f)
    snapped, dropped = snap_all(parsed, spec)
    save_snapped(snapped, ws / "snapped.jsonl")
    if dropped or parsed.duplicate_count:
        click.echo(f"dropped {dropped} out-of-bbox points, "
                   f"{parsed.duplicate_count} duplicate timestamps", err=True)
    return ["snapped.jsonl", "grid.json"]


def run_flow(ws: Path) -> list[str]:
    spec = GridSpec.from_json((ws / "grid.json").read_text())
    trajs = load_snapped(ws / "snapped.jsonl", spec)
    slices = sorted({s for t in trajs for s in t.slices()})
    flows_dir = ws / "flows"
    flows_dir.mkdir(exist_ok=True)
    outputs = []
    indexes = []
    for k in slices:
        tensor, index = flow_mod.build_flow(trajs, k, spec)
        flow_mod.save_flow_tensor(tensor, k, flows_dir / f"k_{k}.bin")
        indexes.append(index)
        outputs += [f"flows/k_{k}.bin", f"flows/k_{k}.json"]
    flow_mod.save_index(flow_mod.merge_indexes(indexes), ws / "index.jsonl")
    return outputs + ["index.jsonl"]


def _load_flows(ws: Path) -> dict[int, np.ndarray]:
    flows = {}
    for path in sorted((ws / "flows").glob("k_*.bin")):
        tensor, k = flow_mod.load_flow_tensor(path)
        flows[k] = tensor
    if not flows:
        raise click.ClickException("no flow tensors in workspace; run `flow` first")
    return flows


def run_train(ws: Path, model: str, ridge: float, radius: int,
              history: int) -> list[str]:
    flows = _load_flows(ws)
    tensors = [flows[k] for k in sorted(flows)]
    if model == "havg":
        predictor = pred_mod.HistoricalAveragePredictor()
    else:
        pairs = pred_mod.training_pairs(tensors, history)
        if len(pairs) < 2:
            raise click.ClickException(
                f"need >= {history + 2} slices to train the linear model")
        predictor = pred_mod.fit_linear(pairs, ridge_lambda=ridge, window_radius=radius)
    (ws / "model").mkdir(exist_ok=True)
    pred_mod.save_predictor(predictor, ws / "model" / "params.bin")
    _update_config(ws, model=model, history_length=history, ridge=ridge, radius=radius)
    return ["model/params.bin", "model/params.json", "config.json"]


def run_kselect(ws: Path, kmin: int, kmax: int, seed: int) -> list[str]:
    points = load_intersections(ws / "intersections.csv")
    rows = kselect_sweep(points, kmin, kmax, seed=seed)
    _atomic_write(ws / "kselect.json", json.dumps(rows, sort_keys=True))
    click.echo(f"{'K':>3} {'sigma2':>12} {'within_sse':>12}")
    for row in rows:
        click.echo(f"{row['K']:>3} {row['sigma2']:>12.4f} {row['sse']:>12.4f}")
    return ["kselect.json"]


def run_partition(ws: Path, k: int, seed: int) -> list[str]:
    spec = GridSpec.from_json((ws / "grid.json").read_text())
    points = load_intersections(ws / "intersections.csv")
    partition = build_partition(points, k, spec, seed=seed)
    save_partition_geojson(partition, ws / "partition.geojson")
    _update_config(ws, K=k, partition_seed=seed)
    return ["partition.geojson", "config.json"]


def run_attribute(ws: Path, target: str, channel: str, horizon: int,
                  grouping: str, nsamples: int, seed: int, k: int,
                  name: str, split_mode: str) -> list[str]:
    from .service import load_snapshot

    snapshot = load_snapshot(ws)
    kind, _, rest = target.partition(":")
    if kind == "cell":
        u, v = (int(x) for x in rest.split(","))
        spec = attr.TargetSpec("cell", Channel.from_label(channel), horizon, cell=(u, v))
    elif kind == "region":
        spec = attr.TargetSpec("region", Channel.from_label(channel), horizon,
                               region_id=int(rest))
    else:
        raise click.ClickException(f"bad --target {target!r}; use cell:u,v or region:id")
    try:
        window_slices = snapshot.window_slices(k)
    except KeyError as e:
        raise click.ClickException(str(e))
    result = attr.region_shap(
        snapshot.window_at(k), snapshot.background, snapshot.predictor, spec,
        grouping=grouping, cell_region=snapshot.partition.cell_region,
        nsamples=nsamples, seed=seed)
    body = result.as_dict()
    if grouping == "cell":
        tres = attr.trajectory_shap(result, snapshot.index, window_slices,
                                    mode=split_mode)
        body["trajectory_residual"] = tres.residual
        body["trajectories"] = [s.as_dict() for s in tres.scores]
    (ws / "attribution").mkdir(exist_ok=True)
    _atomic_write(ws / "attribution" / f"{name}.json",
                  json.dumps(body, sort_keys=True))
    return [f"attribution/{name}.json"]


RUNNERS = {
    "synth": run_synth,
    "ingest": run_ingest,
    "flow": run_flow,
    "train": run_train,
    "kselect": run_kselect,
    "partition": run_partition,
    "attribute": run_attribute,
}


def _execute(ws: Path, command: str, flags: dict) -> None:
    ws.mkdir(parents=True, exist_ok=True)
    started = time.time()
    outputs = RUNNERS[command](ws, **flags)
    _write_manifest(ws, command, flags, outputs, started)


workspace_option = click.option(
    "--workspace", "-w", default=".", show_default=True,
    help="Workspace directory holding all pipeline artifacts.")


@click.group()
def main():
    """Traffic flow tensors, baseline predictors, and Shapley attribution."""


@main.command()
@workspace_option
@click.option("--scenario", required=True, help="Scenario JSON file.")
def synth(workspace, scenario):
    """Generate synthetic intersections and trajectories from a scenario."""
    _execute(Path(workspace), "synth", {"scenario": scenario})


@main.command()
@workspace_option
@click.option("--input-file", default="trajectories.csv", show_default=True)
@click.option("--grid", default="38x36", show_default=True, help="Grid as ROWSxCOLS.")
@click.option("--slice-seconds", default=600.0, show_default=True)
@click.option("--bbox", default=None, help="lon_min,lat_min,lon_max,lat_max")
def ingest(workspace, input_file, grid, slice_seconds, bbox):
    """Parse and snap raw trajectory CSV onto the grid."""
    _execute(Path(workspace), "ingest",
             {"input_file": input_file, "grid": grid,
              "slice_seconds": slice_seconds, "bbox": bbox})


@main.command()
@workspace_option
def flow(workspace):
    """Build per-slice in/out-flow tensors and the trajectory index."""
    _execute(Path(workspace), "flow", {})


@main.command()
@workspace_option
@click.option("--model", type=click.Choice(["linear", "havg"]), default="linear",
              show_default=True)
@click.option("--ridge", default=0.1, show_default=True)
@click.option("--radius", default=1, show_default=True)
@click.option("--history", default=pred_mod.DEFAULT_HISTORY_LENGTH, show_default=True)
def train(workspace, model, ridge, radius, history):
    """Fit a baseline predictor on the workspace's flow tensors."""
    _execute(Path(workspace), "train",
             {"model": model, "ridge": ridge, "radius": radius, "history": history})


@main.command()
@workspace_option
@click.option("--kmin", default=1, show_default=True)
@click.option("--kmax", default=26, show_default=True)
@click.option("--seed", default=0, show_default=True)
def kselect(workspace, kmin, kmax, seed):
    """Sweep K and report the cluster-balance variance diagnostic."""
    _execute(Path(workspace), "kselect", {"kmin": kmin, "kmax": kmax, "seed": seed})


@main.command()
@workspace_option
@click.option("--k", default=21, show_default=True, help="Number of regions.")
@click.option("--seed", default=0, show_default=True)
def partition(workspace, k, seed):
    """Cluster intersections and export merged region polygons."""
    _execute(Path(workspace), "partition", {"k": k, "seed": seed})


@main.command()
@workspace_option
@click.option("--target", required=True, help="cell:u,v or region:id")
@click.option("--channel", type=click.Choice(["in", "out"]), default="in",
              show_default=True)
@click.option("--horizon", default=1, show_default=True)
@click.option("--grouping", type=click.Choice(["cell", "region"]), default="region",
              show_default=True)
@click.option("--nsamples", default=4096, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--k", required=True, type=int, help="Explained time slice.")
@click.option("--name", default="result", show_default=True)
@click.option("--split-mode", type=click.Choice(["equal", "proportional"]),
              default="equal", show_default=True)
def attribute(workspace, target, channel, horizon, grouping, nsamples, seed, k,
              name, split_mode):
    """Run Shapley attribution for one prediction target."""
    _execute(Path(workspace), "attribute",
             {"target": target, "channel": channel, "horizon": horizon,
              "grouping": grouping, "nsamples": nsamples, "seed": seed,
              "k": k, "name": name, "split_mode": split_mode})


@main.command()
@click.option("--manifest", required=True, help="RunManifest JSON to replay.")
@workspace_option
def replay(manifest, workspace):
    """Re-execute a recorded stage into a workspace."""
    obj = json.loads(Path(manifest).read_text())
    command = obj["command"]
    if command not in RUNNERS:
        raise click.ClickException(f"manifest names unknown command {command!r}")
    _execute(Path(workspace), command, obj["flags"])


@main.command()
@click.option("--snapshot", "snapshot_dir", required=True,
              help="Workspace directory to publish.")
@click.option("--port", default=8000, show_default=True,
              envvar="TRAFSHAP_PORT", help="Port (env TRAFSHAP_PORT overrides).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--static-dir", default=None, help="Optional UI bundle to serve.")
def serve(snapshot_dir, port, host, static_dir):
    """Publish a workspace snapshot over HTTP."""
    import uvicorn

    from .service import create_app, load_snapshot

    app = create_app(load_snapshot(Path(snapshot_dir)), static_dir=static_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
