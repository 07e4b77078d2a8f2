import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from trafshap.flow import Channel, build_flow
from trafshap.ingest import GridSpec
from trafshap.predictor import HistoricalAveragePredictor
from trafshap.regions import build_partition
from trafshap.service import build_snapshot, create_app

from conftest import make_traj, random_trajectories

GRID = GridSpec(0, 10, 0, 10, 5, 5, slice_seconds=600, epoch_origin=0)
L = 3


def make_snapshot(seed=0, n=60, glyph_nsamples=64):
    rng = np.random.default_rng(seed)
    trajs = []
    for k in range(8):
        for t in random_trajectories(GRID, n // 8, rng, max_len=6):
            trajs.append(make_traj(GRID, f"k{k}_{t.trajectory_id}",
                                   [(s.row, s.col) for s in t.samples], k=k))
    points = rng.uniform(0, 10, size=(12, 2))
    partition = build_partition(points, 3, GRID, seed=1)
    return build_snapshot(GRID, partition, trajs,
                          HistoricalAveragePredictor(), history_length=L,
                          glyph_nsamples=glyph_nsamples, glyph_seed=2)


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(make_snapshot()))


def wait_done(client, job_id, timeout=60.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        body = client.get(f"/api/attribution/{job_id}").json()
        if body["state"] in ("done", "failed"):
            return body
        time.sleep(0.02)
    raise TimeoutError(f"job {job_id} still {body['state']}")


class TestGeometry:
    def test_ok(self, client):
        body = client.get("/api/geometry").json()
        assert body["dataset_id"] == "default"
        assert body["grid"]["rows"] == 5
        assert body["regions"]["type"] == "FeatureCollection"
        assert len(body["regions"]["features"]) == 3

    def test_unknown_dataset(self, client):
        assert client.get("/api/geometry", params={"dataset": "x"}).status_code == 404

    def test_unpublished_is_503(self):
        bare = TestClient(create_app(None))
        assert bare.get("/api/geometry").status_code == 503
        assert bare.get("/api/flows", params={"k": 0}).status_code == 503


class TestFlows:
    def test_matches_snapshot(self, client):
        body = client.get("/api/flows", params={"k": 3}).json()
        assert body["k"] == 3
        assert body["dims"] == [2, 5, 5]

    def test_out_of_range(self, client):
        assert client.get("/api/flows", params={"k": 999}).status_code == 400


class TestPredict:
    def test_single_step_equals_direct_call(self, client):
        snap = make_snapshot()
        body = client.get("/api/predict", params={"k": 5, "steps": 1}).json()
        expected = HistoricalAveragePredictor().predict(snap.window_at(5))
        got = np.array(body["predictions"][0]["values"])
        assert got == pytest.approx(expected)

    def test_default_steps(self, client):
        body = client.get("/api/predict", params={"k": 5}).json()
        assert len(body["predictions"]) == 6

    def test_bad_steps(self, client):
        assert client.get("/api/predict",
                          params={"k": 5, "steps": 0}).status_code == 400

    def test_window_out_of_range(self, client):
        assert client.get("/api/predict", params={"k": 0}).status_code == 400

    def test_constant_history_predicts_current(self):
        trajs = []
        for k in range(L + 1):
            trajs.extend(make_traj(GRID, f"t{k}_{i}", [(1, 1), (2, 2)], k=k)
                         for i in range(3))
        rng = np.random.default_rng(1)
        partition = build_partition(rng.uniform(0, 10, size=(6, 2)), 2, GRID)
        snap = build_snapshot(GRID, partition, trajs,
                              HistoricalAveragePredictor(), history_length=L)
        c = TestClient(create_app(snap))
        pred = np.array(c.get("/api/predict", params={"k": L, "steps": 1})
                        .json()["predictions"][0]["values"])
        current = np.array(c.get("/api/flows", params={"k": L}).json()["values"])
        assert pred == pytest.approx(current)


class TestAttributionJobs:
    def submit(self, client, **overrides):
        req = {"kind": "cell", "cell": [2, 2], "channel": "in", "horizon": 1,
               "grouping": "cell", "nsamples": 256, "seed": 3, "k": 5}
        req.update(overrides)
        resp = client.post("/api/attribution", json=req)
        assert resp.status_code == 200
        return resp.json()["job_id"]

    def test_lifecycle_and_efficiency(self, client):
        job_id = self.submit(client)
        body = wait_done(client, job_id)
        assert body["state"] == "done", body.get("error")
        result = body["result"]
        total = sum(result["phi"].values())
        assert abs(result["full_value"] - result["base_value"] - total) < 1e-9

    def test_repeat_submission_is_deterministic(self, client):
        a = wait_done(client, self.submit(client))["result"]
        b = wait_done(client, self.submit(client))["result"]
        assert a["phi"] == b["phi"]

    def test_unknown_job(self, client):
        assert client.get("/api/attribution/nope").status_code == 404

    def test_bad_slice_rejected_at_submit(self, client):
        resp = client.post("/api/attribution", json={
            "kind": "cell", "cell": [2, 2], "k": 0})
        assert resp.status_code == 400

    def test_trajectories_endpoint(self, client):
        job_id = self.submit(client)
        wait_done(client, job_id)
        body = client.get(f"/api/attribution/{job_id}/trajectories").json()
        assert body["k"] == 5
        assert len(body["trajectories"]) <= 5
        totals = [abs(t["total"]) for t in body["trajectories"]]
        assert totals == sorted(totals, reverse=True)
        for t in body["trajectories"]:
            assert t["total"] == pytest.approx(t["total_in"] + t["total_out"])
            assert len(t["per_tau"]) == L

    def test_trajectories_on_running_job_is_409(self, client):
        job_id = self.submit(client, nsamples=1024)
        resp = client.get(f"/api/attribution/{job_id}/trajectories")
        assert resp.status_code in (200, 409)  # may already be done
        wait_done(client, job_id)

    def test_region_grouping_has_no_trajectory_view(self, client):
        job_id = self.submit(client, grouping="region", nsamples=256)
        body = wait_done(client, job_id)
        assert body["state"] == "done", body.get("error")
        resp = client.get(f"/api/attribution/{job_id}/trajectories")
        assert resp.status_code == 400

    def test_region_target(self, client):
        job_id = self.submit(client, kind="region", cell=None, region_id=0)
        body = wait_done(client, job_id)
        assert body["state"] == "done", body.get("error")


class TestGlyphs:
    def test_payload_and_cache(self, client):
        body = client.get("/api/glyphs",
                          params={"k": 5, "horizon": 2, "steps": 2}).json()
        assert len(body["glyphs"]) == 3
        for g in body["glyphs"]:
            assert len(g["sectors"]) == 8
            assert len(g["predicted_series"]) == 3  # current + 2 steps
            assert g["selected_horizon"] == 2
        again = client.get("/api/glyphs",
                           params={"k": 5, "horizon": 2, "steps": 2}).json()
        assert again == body

    def test_series_matches_region_sum(self, client):
        snap = make_snapshot()
        body = client.get("/api/glyphs",
                          params={"k": 5, "horizon": 1, "steps": 1}).json()
        for g in body["glyphs"]:
            cells = snap.partition.region_cells(g["region_id"])
            expected = float(sum(snap.flows[5][0, i, j] for i, j in cells))
            assert g["predicted_series"][0] == pytest.approx(expected)

    def test_bad_slice(self, client):
        assert client.get("/api/glyphs", params={"k": 0}).status_code == 400


class TestRegionGrids:
    def test_series_lengths(self, client):
        body = client.get("/api/region/1/grids",
                          params={"k": 5, "steps": 4}).json()
        assert body["region_id"] == 1
        for cell in body["cells"]:
            assert len(cell["series"]) == 5  # current + steps
            assert set(cell["current"]) == {"in", "out"}

    def test_covers_whole_region(self, client):
        snap = make_snapshot()
        body = client.get("/api/region/0/grids", params={"k": 5}).json()
        assert len(body["cells"]) == len(snap.partition.region_cells(0))

    def test_unknown_region(self, client):
        assert client.get("/api/region/9/grids",
                          params={"k": 5}).status_code == 404
