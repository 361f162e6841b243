import pytest

import app as app_module
import run_worker
from test_harness import SMALL_TENSION


@pytest.fixture
def client(job_store):
    app_module.app.config["TESTING"] = True
    with app_module.app.test_client() as c:
        yield c


def test_liveness(client):
    resp = client.get("/healthz")
    assert resp.status_code == 200
    assert resp.data == b"ok"


def test_health_counts_jobs(client, job_store):
    client.post("/api/runs", json={"preset": "table1_tension"})
    body = client.get("/api/health").get_json()
    assert body["success"] is True
    assert body["worker_enabled"] is False
    assert body["jobs"] == {"queued": 1}
    assert "build" in body


def test_presets(client):
    body = client.get("/api/presets").get_json()
    assert body["presets"] == ["table1_shear", "table1_tension", "table2_compression"]
    one = client.get("/api/presets/table1_shear").get_json()
    assert one["name"] == "table1_shear"
    assert "experiment = shear" in one["config"]
    missing = client.get("/api/presets/table9_bending")
    assert missing.status_code == 404
    assert "unknown preset" in missing.get_json()["error"]


def test_create_from_preset(client):
    resp = client.post("/api/runs", json={"preset": "table1_tension"})
    assert resp.status_code == 201
    job = resp.get_json()["job"]
    assert job["status"] == "queued"
    assert job["experiment"] == "tension"
    assert job["label"] == "table1_tension"

    listed = client.get("/api/runs").get_json()["jobs"]
    assert [j["job_id"] for j in listed] == [job["job_id"]]
    fetched = client.get(f"/api/runs/{job['job_id']}").get_json()["job"]
    assert fetched["config_digest"] == job["config_digest"]


def test_create_needs_preset_or_config(client):
    resp = client.post("/api/runs", json={})
    assert resp.status_code == 400
    assert resp.get_json()["success"] is False


def test_bad_config_is_rejected_with_its_line(client, job_store):
    text = SMALL_TENSION.replace("poisson = 0.3", "poison = 0.3")
    resp = client.post("/api/runs", json={"config": text})
    assert resp.status_code == 400
    body = resp.get_json()
    assert body["line"] == 7
    assert "poisson" in body["error"]
    assert job_store.list_jobs() == []


def test_unknown_and_malformed_ids(client):
    assert client.get("/api/runs/" + "a" * 32).status_code == 404
    assert client.get("/api/runs/nope").status_code == 404
    assert client.get("/api/runs/nope/logs").status_code == 404
    resp = client.get("/api/no-such-route")
    assert resp.status_code == 404
    assert resp.get_json() == {"success": False, "error": "Not found"}


def test_curve_is_missing_until_the_run_finishes(client):
    job = client.post("/api/runs", json={"config": SMALL_TENSION, "label": "small"}).get_json()["job"]
    assert job["label"] == "small"
    resp = client.get(f"/api/runs/{job['job_id']}/curve.csv")
    assert resp.status_code == 404
    assert "queued" in resp.get_json()["error"]
    logs = client.get(f"/api/runs/{job['job_id']}/logs").get_json()
    assert logs == {"success": True, "status": "queued", "logs": ""}


def test_finished_run_serves_its_curve(client):
    job = client.post("/api/runs", json={"config": SMALL_TENSION}).get_json()["job"]
    result = run_worker.run_once("test-worker")
    assert result["ok"], result

    record = client.get(f"/api/runs/{job['job_id']}").get_json()["job"]
    assert record["status"] == "done"
    assert record["summary"]["rows"] == 501

    resp = client.get(f"/api/runs/{job['job_id']}/curve.csv")
    assert resp.status_code == 200
    assert resp.mimetype == "text/csv"
    assert resp.data.decode("utf-8").splitlines()[0].startswith("step,time_s,opening_m,sigma_n_Pa")
    assert "RESULT_JSON:" in client.get(f"/api/runs/{job['job_id']}/logs").get_json()["logs"]


def test_oversized_body(client):
    resp = client.post("/api/runs", data="x" * (2 * 1024 * 1024), content_type="application/json")
    assert resp.status_code == 413
    assert resp.get_json()["success"] is False
