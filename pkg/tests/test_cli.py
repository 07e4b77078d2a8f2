import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from trafshap.cli import main
from trafshap.ingest import GridSpec
from trafshap.synth import ODPattern, Scenario

GRID = GridSpec(0, 10, 0, 10, 8, 8, slice_seconds=600, epoch_origin=0)


def scenario_file(path: Path) -> Path:
    sc = Scenario(
        GRID,
        [ODPattern((0, 4), (4, 4), 4.0, label="surge"),
         ODPattern((7, 7), (2, 2), 2.0, label="cross")],
        duration_slices=10, seed=5, n_intersections=40, layout_seed=3)
    path.write_text(sc.to_json())
    return path


def run(args):
    result = CliRunner().invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


@pytest.fixture(scope="module")
def pipeline_ws(tmp_path_factory):
    """A workspace carried through synth -> ingest -> flow -> train ->
    partition -> attribute."""
    base = tmp_path_factory.mktemp("cli")
    ws = base / "ws"
    sc = scenario_file(base / "scenario.json")
    run(["synth", "-w", str(ws), "--scenario", str(sc)])
    run(["ingest", "-w", str(ws)])
    run(["flow", "-w", str(ws)])
    run(["train", "-w", str(ws), "--model", "havg", "--history", "3"])
    run(["partition", "-w", str(ws), "--k", "4", "--seed", "1"])
    run(["attribute", "-w", str(ws), "--target", "cell:4,4", "--k", "4",
         "--grouping", "region", "--nsamples", "256", "--seed", "2"])
    return ws


class TestPipeline:
    def test_artifacts_exist(self, pipeline_ws):
        for rel in ("trajectories.csv", "grid.json", "snapped.jsonl",
                    "index.jsonl", "model/params.bin", "partition.geojson",
                    "attribution/result.json", "config.json"):
            assert (pipeline_ws / rel).exists(), rel
        assert list((pipeline_ws / "flows").glob("k_*.bin"))

    def test_manifests_recorded(self, pipeline_ws):
        for cmd in ("synth", "ingest", "flow", "train", "partition", "attribute"):
            m = json.loads((pipeline_ws / "manifests" / f"{cmd}.json").read_text())
            assert m["command"] == cmd
            assert isinstance(m["flags"], dict)
            assert m["outputs"] == sorted(m["outputs"])
            assert m["wall_time_s"] >= 0
            assert "trafshap" in m["versions"]

    def test_attribution_output_shape(self, pipeline_ws):
        body = json.loads(
            (pipeline_ws / "attribution" / "result.json").read_text())
        assert set(body["phi"]) and all(
            isinstance(v, float) for v in body["phi"].values())
        total = sum(body["phi"].values())
        assert abs(body["full_value"] - body["base_value"] - total) < 1e-9

    def test_per_cell_attribution_includes_trajectories(self, pipeline_ws):
        run(["attribute", "-w", str(pipeline_ws), "--target", "cell:4,4",
             "--k", "4", "--grouping", "cell", "--nsamples", "1024",
             "--seed", "2", "--name", "cellwise"])
        body = json.loads(
            (pipeline_ws / "attribution" / "cellwise.json").read_text())
        assert "trajectories" in body
        assert "trajectory_residual" in body

    def test_config_accumulates(self, pipeline_ws):
        config = json.loads((pipeline_ws / "config.json").read_text())
        assert config["model"] == "havg"
        assert config["history_length"] == 3
        assert config["K"] == 4


class TestKselect:
    def test_table_rows(self, tmp_path):
        ws = tmp_path / "ws"
        sc = scenario_file(tmp_path / "scenario.json")
        run(["synth", "-w", str(ws), "--scenario", str(sc)])
        result = run(["kselect", "-w", str(ws), "--kmin", "1", "--kmax", "26",
                      "--seed", "4"])
        lines = [l for l in result.output.splitlines() if l.strip()]
        assert len(lines) == 27  # header + one row per K
        rows = json.loads((ws / "kselect.json").read_text())
        assert [r["K"] for r in rows] == list(range(1, 27))


class TestErrors:
    def test_unknown_flag(self):
        result = CliRunner().invoke(main, ["flow", "--bogus"])
        assert result.exit_code == 2

    def test_flow_without_ingest(self, tmp_path):
        result = CliRunner().invoke(main, ["flow", "-w", str(tmp_path)])
        assert result.exit_code != 0

    def test_ingest_without_grid_or_bbox(self, tmp_path):
        (tmp_path / "trajectories.csv").write_text("a,0,1,1\n")
        result = CliRunner().invoke(main, ["ingest", "-w", str(tmp_path)])
        assert result.exit_code != 0
        assert "--bbox" in result.output

    def test_bad_target_syntax(self, pipeline_ws):
        result = CliRunner().invoke(main, [
            "attribute", "-w", str(pipeline_ws), "--target", "nope",
            "--k", "4"])
        assert result.exit_code != 0


class TestReplay:
    def stage_bytes(self, ws: Path, outputs: list[str]) -> dict[str, bytes]:
        return {rel: (ws / rel).read_bytes() for rel in outputs}

    def test_byte_identical_replay(self, pipeline_ws, tmp_path):
        ws2 = tmp_path / "replayed"
        stages = ("synth", "ingest", "flow", "train", "partition", "attribute")
        manifests = {}
        for cmd in stages:
            manifest_path = pipeline_ws / "manifests" / f"{cmd}.json"
            manifests[cmd] = json.loads(manifest_path.read_text())
            if cmd == "synth":
                # the scenario path flag must stay resolvable
                assert Path(manifests[cmd]["flags"]["scenario"]).exists()
            run(["replay", "--manifest", str(manifest_path), "-w", str(ws2)])
        # compare once the whole pipeline has replayed, since config.json
        # accumulates entries across stages
        for cmd in stages:
            original = self.stage_bytes(pipeline_ws, manifests[cmd]["outputs"])
            replayed = self.stage_bytes(ws2, manifests[cmd]["outputs"])
            assert original == replayed, f"stage {cmd} diverged"

    def test_unknown_command_in_manifest(self, tmp_path):
        bad = tmp_path / "m.json"
        bad.write_text(json.dumps({"command": "nope", "flags": {}}))
        result = CliRunner().invoke(main, ["replay", "--manifest", str(bad),
                                           "-w", str(tmp_path / "ws")])
        assert result.exit_code != 0
