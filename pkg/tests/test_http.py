"""HTTP surface: registry endpoints, inference, scoring, orchestrator verbs."""

import pytest
from fastapi.testclient import TestClient

from dlflow.httpapi import create_app


@pytest.fixture(scope="module")
def client(tmp_path_factory):
    from conftest import build_served_text_model

    root = tmp_path_factory.mktemp("http") / "ws"
    ws, info = build_served_text_model(root)
    app = create_app(root)
    return TestClient(app), ws, info


def test_get_model(client):
    http, _ws, info = client
    response = http.get("/models/mini-clf")
    assert response.status_code == 200
    versions = response.json()
    assert versions[0]["version"] == 1
    assert versions[0]["stage"] == "production"


def test_get_unknown_model_404(client):
    http, _ws, _info = client
    response = http.get("/models/nope")
    assert response.status_code == 404
    assert response.json()["error"] == "not-found"


def test_register_submit_review_promote_over_http(client):
    http, ws, info = client
    body = {
        "checkpoint": info["checkpoint"],
        "experiment": info["experiment"],
        "source_snapshot": info["raw_commit"],
        "creator": "sam",
    }
    created = http.post("/models/http-model/versions", json=body)
    assert created.status_code == 200
    version = created.json()["version"]

    res = http.post(
        f"/models/http-model/versions/{version}/metrics",
        json={"metrics": {"test_accuracy": 0.95}},
    )
    assert res.status_code == 200

    res = http.post(f"/models/http-model/versions/{version}/submit", json={"actor": "sam"})
    assert res.status_code == 200
    assert res.json()["stage"] == "submitted"

    denied = http.post(
        f"/models/http-model/versions/{version}/review",
        json={"decision": "approve", "reviewer": "dev"},
    )
    assert denied.status_code == 403

    res = http.post(
        f"/models/http-model/versions/{version}/review",
        json={"decision": "approve", "reviewer": "val"},
    )
    assert res.json()["stage"] == "approved"

    res = http.post(f"/models/http-model/versions/{version}/promote", json={"actor": "dev"})
    assert res.json()["stage"] == "production"


def test_wrong_stage_conflict_status(client):
    http, _ws, info = client
    res = http.post("/models/mini-clf/versions/1/submit", json={"actor": "sam"})
    assert res.status_code == 409
    assert res.json()["error"] == "wrong-stage"


def test_predict_over_http_and_scoring(client):
    http, ws, info = client
    before = len(ws.serving.scoring_records("mini-clf"))
    response = http.post("/predict/mini-clf", json={"data": {"text": "alpha beta gamma"}})
    assert response.status_code == 200
    body = response.json()
    assert set(body) == {"label", "scores", "model_version", "request_id"}

    bad = http.post("/predict/mini-clf", json={"data": {"wrong": 1}})
    assert bad.status_code == 400
    assert bad.json()["error"] == "malformed-payload"

    records = http.get("/scoring/mini-clf").json()
    assert len(records) == before + 2
    assert records[-1]["status"] == "error"


def test_predict_scores_round_trip_bit_exact(client):
    """JSON serialization must not perturb the float64 scores."""
    http, ws, info = client
    text = "alpha beta"
    offline = ws.serving.predict("mini-clf", {"data": {"text": text}})
    online = http.post("/predict/mini-clf", json={"data": {"text": text}}).json()
    assert online["scores"] == offline["scores"]


def test_deployments_listing(client):
    http, _ws, _info = client
    deployments = http.get("/deployments").json()
    names = {d["deployment"] for d in deployments}
    assert "mini-clf" in names


def test_orchestrator_repo_commit_diff(client):
    http, _ws, _info = client
    assert http.post("/api/v1/repos/http-repo").status_code == 200
    first = http.post(
        "/api/v1/repos/http-repo/commits",
        json={"message": "one", "files_text": {"a.txt": "alpha"}},
    ).json()
    second = http.post(
        "/api/v1/repos/http-repo/commits",
        json={"message": "two", "files_text": {"a.txt": "alpha", "b.txt": "beta"}},
    ).json()
    repos = http.get("/api/v1/repos").json()
    assert any(r["name"] == "http-repo" for r in repos)
    diff = http.get(
        f"/api/v1/repos/http-repo/diff/{first['commit']}/{second['commit']}"
    ).json()
    assert diff == [{"path": "b.txt", "change": "added"}]


def test_orchestrator_pipeline_and_lineage(client):
    http, _ws, _info = client
    http.post("/api/v1/repos/http-raw")
    http.post(
        "/api/v1/repos/http-raw/commits",
        json={"message": "m", "files_text": {"d.txt": "word " * 10}},
    )
    registered = http.post(
        "/api/v1/pipelines",
        json={
            "name": "http-clean",
            "inputs": [{"repo": "http-raw", "branch": "master"}],
            "transform": "clean-validate-text",
            "params": {"min_chars": 5, "extension": ".txt"},
        },
    )
    assert registered.status_code == 200
    run = http.post("/api/v1/pipelines/http-clean/runs").json()
    assert run["status"] == "succeeded"
    lineage = http.get(f"/api/v1/lineage/http-clean/{run['output_commit']}").json()
    assert len(lineage["nodes"]) == 2


def test_orchestrator_labels_and_experiments(client):
    http, _ws, info = client
    labels = http.get(
        "/api/v1/labels",
        params={"split": "train", "repo": "mini-split", "ref": info["split_head"]},
    ).json()
    assert labels
    experiments = http.get("/api/v1/experiments").json()
    assert any(e["id"] == info["experiment"] for e in experiments)
    best = http.get(f"/api/v1/experiments/{info['experiment']}/best").json()
    assert best["checkpoint"] == info["checkpoint"]


def test_orchestrator_workflow_and_trace(client):
    http, _ws, info = client
    res = http.post("/api/v1/workflow/step", json={"step": "project-start", "actor": "val"})
    assert res.status_code == 200
    res = http.post("/api/v1/workflow/step", json={"step": "define-requirements", "actor": "val"})
    assert res.json()["current_step"] == "define-requirements"
    illegal = http.post("/api/v1/workflow/step", json={"step": "review", "actor": "val"})
    assert illegal.status_code == 409

    state = http.get("/api/v1/workflow").json()
    assert state["current_step"] == "define-requirements"

    traced = http.get("/api/v1/trace/mini-clf/1").json()
    assert traced["dataset_digest"]["match"] is True
    assert traced["chain"][0]["kind"] == "model"
