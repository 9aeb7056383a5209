"""Serving: packaging gates, deployment selectors, online/offline score
consistency, and scoring capture."""

import numpy as np
import pytest

from dlflow.errors import (
    EndpointConflict,
    MalformedPayload,
    MissingArtifact,
    NoProductionVersion,
    NotFound,
    WrongStage,
)
from dlflow.learners.nn import Mlp
from dlflow.learners.text import Vocabulary, vectorize
from dlflow.serving import TEXT_WRAPPER


def test_package_requires_approved_or_production(served):
    ws, info = served
    mv = ws.models.register_model(
        "unreviewed", info["checkpoint"], info["experiment"], info["raw_commit"], creator="sam"
    )
    with pytest.raises(WrongStage):
        ws.serving.package_model("unreviewed", mv.version, TEXT_WRAPPER)


def test_package_hash_deterministic(served):
    ws, info = served
    p1 = ws.serving.package_model("mini-clf", info["version"], TEXT_WRAPPER)
    p2 = ws.serving.package_model("mini-clf", info["version"], TEXT_WRAPPER)
    assert p1.package_hash == p2.package_hash


def test_package_missing_artifact(served):
    ws, info = served
    wrapper = dict(TEXT_WRAPPER, init=["weights", "no-such-artifact"])
    with pytest.raises(MissingArtifact):
        ws.serving.package_model("mini-clf", info["version"], wrapper)


def test_deploy_requires_production_version(served):
    ws, info = served
    with pytest.raises(NoProductionVersion):
        ws.serving.deploy(
            {"deployment_name": "ghost", "model_name": "unreviewed", "selector": {"stage": "production"}}
        )


def test_deploy_endpoint_conflict(served):
    ws, info = served
    with pytest.raises(EndpointConflict):
        ws.serving.deploy(
            {
                "deployment_name": "second",
                "model_name": "mini-clf",
                "selector": {"stage": "production"},
                "endpoint": "/predict/mini-clf",
            }
        )


def test_predict_matches_offline_forward_pass(served):
    ws, info = served
    ckpt = ws.experiments.best_checkpoint(info["experiment"], "validation_accuracy", "max")
    artifacts = ws.experiments.read_artifacts(ckpt)
    model = Mlp.deserialize(artifacts["weights"])
    vocab = Vocabulary.from_bytes(artifacts["vocabulary"])

    from dlflow.learners.text import LabelEncoding

    encoding = LabelEncoding.from_bytes(artifacts["labels"])
    labels = ws.labels.query_labels("train", "mini-split", info["split_head"])
    for path, _expected in labels[:5]:
        text = ws.data.read_file("mini-split", info["split_head"], path).decode("utf-8")
        response = ws.serving.predict("mini-clf", {"data": {"text": text}})
        offline_probs, _ = model.forward(vectorize(text, vocab)[None, :], train=False)
        for i, class_name in enumerate(encoding.classes):
            assert response["scores"][class_name] == offline_probs[0][i]
        assert response["model_version"] == info["version"]
        assert "request_id" in response


def test_prediction_of_training_document_hits_its_class(served):
    ws, info = served
    labels = ws.labels.query_labels("train", "mini-split", info["split_head"])
    hits = 0
    for path, expected in labels[:10]:
        text = ws.data.read_file("mini-split", info["split_head"], path).decode("utf-8")
        response = ws.serving.predict("mini-clf", {"data": {"text": text}})
        hits += response["label"] == expected
    assert hits >= 9


def test_identical_requests_identical_predictions_distinct_records(served):
    ws, info = served
    before = len(ws.serving.scoring_records("mini-clf"))
    r1 = ws.serving.predict("mini-clf", {"data": {"text": "alpha beta"}})
    r2 = ws.serving.predict("mini-clf", {"data": {"text": "alpha beta"}})
    assert r1["scores"] == r2["scores"]
    assert r1["label"] == r2["label"]
    assert r1["request_id"] != r2["request_id"]
    records = ws.serving.scoring_records("mini-clf")
    assert len(records) == before + 2
    assert records[-1]["input_digest"] == records[-2]["input_digest"]


def test_malformed_payloads_recorded(served):
    ws, info = served
    before = len(ws.serving.scoring_records("mini-clf"))
    for payload in ({"nope": 1}, {"data": {"wrong": "key"}}, {"data": 42}, [1, 2]):
        with pytest.raises(MalformedPayload):
            ws.serving.predict("mini-clf", payload)
    records = ws.serving.scoring_records("mini-clf")
    assert len(records) == before + 4
    assert all(rec["status"] == "error" for rec in records[-4:])


def test_scoring_since_filter(served):
    ws, info = served
    records = ws.serving.scoring_records("mini-clf")
    cutoff = records[len(records) // 2]["received_at"]
    filtered = ws.serving.scoring_records("mini-clf", since=cutoff)
    assert filtered
    assert all(rec["received_at"] >= cutoff for rec in filtered)


def test_unknown_deployment(served):
    ws, info = served
    with pytest.raises(NotFound):
        ws.serving.predict("no-such-deployment", {"data": {"text": "x"}})


def test_pixel_normalization_exact(tmp_path):
    """0 -> 0.0 and 255 -> 1.0 exactly through the /255 scaling."""
    from dlflow.serving import _Runtime, PackagedModel
    from dlflow.learners.nn import Mlp
    from dlflow.learners.text import LabelEncoding

    model = Mlp([784, 4, 10], seed=0)
    encoding = LabelEncoding.build([f"class{i}" for i in range(10)])
    package = PackagedModel("img", 1, dict(
        init=["weights", "labels"],
        preprocess=[
            {"transform": "pixel-normalize", "params": {"scale": 255}},
            {"transform": "flatten", "params": {}},
        ],
        postprocess="label-decode",
    ), "hash")
    runtime = _Runtime(package, {"weights": model.serialize(), "labels": encoding.to_bytes()})

    zeros = runtime._preprocess({"image": [[0] * 28] * 28})
    assert np.array_equal(zeros, np.zeros(784))
    ones = runtime._preprocess({"image": [[255] * 28] * 28})
    assert np.array_equal(ones, np.ones(784))
    mixed = runtime._preprocess({"image": [[0, 255] * 14] * 28})
    assert mixed.min() == 0.0 and mixed.max() == 1.0


def test_redeploy_serves_new_version(served):
    ws, info = served
    name = "mini-clf"
    # second version: register, gate, approve, promote, package, redeploy
    mv = ws.models.register_model(
        name, info["checkpoint"], info["experiment"], info["raw_commit"], creator="sam"
    )
    ws.models.attach_test_metrics(name, mv.version, {"test_accuracy": info["test_accuracy"]})
    ws.models.submit(name, mv.version, "sam")
    ws.models.review(name, mv.version, "approve", "val")
    ws.models.promote_to_production(name, mv.version, "dev")
    ws.serving.package_model(name, mv.version, TEXT_WRAPPER)
    ws.serving.deploy(
        {"deployment_name": name, "model_name": name, "selector": {"stage": "production"}}
    )
    response = ws.serving.predict(name, {"data": {"text": "alpha"}})
    assert response["model_version"] == mv.version


def test_staging_deploy_of_approved_version(served):
    ws, info = served
    name = "mini-clf"
    versions = ws.models.get_model(name)
    approved = [mv for mv in versions if mv.stage == "approved"]
    if not approved:  # ensure one exists
        mv = ws.models.register_model(
            name, info["checkpoint"], info["experiment"], info["raw_commit"], creator="sam"
        )
        ws.models.attach_test_metrics(name, mv.version, {"test_accuracy": 0.9})
        ws.models.submit(name, mv.version, "sam")
        approved = [ws.models.review(name, mv.version, "approve", "val")]
    target = approved[0]
    ws.serving.package_model(name, target.version, TEXT_WRAPPER)
    manifest = {
        "deployment_name": "mini-staging",
        "model_name": name,
        "selector": {"version": target.version},
        "endpoint": "/predict/mini-staging",
    }
    with pytest.raises(WrongStage):
        ws.serving.deploy(manifest, staging=False)
    deployment = ws.serving.deploy(manifest, staging=True)
    assert deployment.version == target.version
