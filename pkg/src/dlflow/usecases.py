"""Scripted end-to-end iterations of the two reference tasks, plus the
lineage trace from a model version back to its raw ingestion commit.

Both scripts run in deterministic mode from a clean root, so two runs with
the same seed produce byte-identical reports (artifact ids included).
"""

import json
from pathlib import Path

import numpy as np

from ._util import canonical_json
from .errors import InvalidConfig, NotFound
from .experiment import ExperimentConfig
from .learners import (
    IMAGE_LEARNER_ID,
    NEWS_CATEGORIES,
    TEXT_LEARNER_ID,
    images_to_files,
    nn,
    synth_corpus,
    synth_images,
)
from .learners.synth import decode_image
from .learners.text import LabelEncoding, Vocabulary, vectorize
from .pipeline import PipelineSpec
from .serving import IMAGE_WRAPPER, TEXT_WRAPPER
from .workspace import Workspace

NEWS_SEED = 2024
FASHION_SEED = 4077

WORKSPACE_REPO = "_workspace"


def evaluate_checkpoint(ws: Workspace, checkpoint, repo: str, ref: str, split: str) -> dict:
    """Offline forward pass of a checkpoint over a labeled split; the same
    code path serving uses, so scores match predictions bit for bit."""
    artifacts = ws.experiments.read_artifacts(checkpoint)
    model = nn.Mlp.deserialize(artifacts["weights"])
    encoding = LabelEncoding.from_bytes(artifacts["labels"])
    labels = ws.labels.query_labels(split, repo, ref)
    if not labels:
        raise NotFound(f"no {split} labels at {repo}@{ref}")
    commit = ws.data.resolve_ref(repo, ref)
    vocab = (
        Vocabulary.from_bytes(artifacts["vocabulary"])
        if "vocabulary" in artifacts
        else None
    )
    rows = []
    for path, _label in labels:
        raw = ws.data.read_file(repo, commit.id, path)
        if vocab is not None:
            rows.append(vectorize(raw.decode("utf-8"), vocab))
        else:
            rows.append(decode_image(raw).astype(np.float64).ravel() / 255.0)
    x = np.stack(rows)
    y = np.array([encoding.encode(label) for _path, label in labels], dtype=np.int64)
    metrics = nn.evaluate(model, (x, y))
    return {"accuracy": metrics["accuracy"], "loss": metrics["loss"]}


def trace(ws: Workspace, model_name: str, version: int) -> dict:
    """Chain a model version back through checkpoint, experiment, dataset
    commit, and pipeline provenance to the raw ingestion commit."""
    mv = ws.models.get_version(model_name, version)
    exp = ws.experiments.get_experiment(mv.experiment)
    repo = exp.config.data_source["repo"]
    chain = [
        {"kind": "model", "id": f"{model_name}@{version}", "stage": mv.stage},
        {"kind": "checkpoint", "id": mv.checkpoint},
        {"kind": "experiment", "id": mv.experiment},
        {"kind": "dataset-commit", "id": exp.data_commit, "repo": repo},
    ]
    current = exp.data_commit
    while True:
        record = ws.pipelines.provenance_for(current)
        if record is None:
            break
        parent = record.input_commits[0]
        chain.append(
            {"kind": "source-commit", "id": parent, "via_spec": record.spec_hash}
        )
        current = parent
    recomputed = ws.data.recompute_tree_digest(repo, exp.data_commit)
    return {
        "chain": chain,
        "raw_commit": current,
        "lineage": ws.pipelines.get_lineage(exp.data_commit),
        "dataset_digest": {
            "recorded": exp.data_tree_digest,
            "recomputed": recomputed,
            "match": recomputed == exp.data_tree_digest,
        },
    }


def _require_clean(ws: Workspace) -> None:
    if not ws.is_clean():
        raise InvalidConfig(f"workdir {ws.root} is not a clean root")


def _source_snapshot(ws: Workspace, config: ExperimentConfig, actor: str) -> str:
    ws.data.ensure_repo(WORKSPACE_REPO, internal=True)
    files = {
        f"{config.name}/experiment.json": canonical_json(
            {
                "name": config.name,
                "entry_point": config.entry_point,
                "hparams": config.hparams,
                "searcher": config.searcher,
                "seed": config.seed,
                "data_source": config.data_source,
            }
        ).encode("utf-8"),
        f"{config.name}/learner.txt": config.entry_point.encode("utf-8"),
    }
    commit = ws.data.commit_files(
        WORKSPACE_REPO, "master", files, author=actor, message=f"snapshot {config.name}"
    )
    return commit.id


def _smoke_predictions(ws: Workspace, deployment: str, requests: list) -> list[dict]:
    out = []
    for expected, payload in requests:
        response = ws.serving.predict(deployment, payload)
        out.append(
            {
                "expected": expected,
                "label": response["label"],
                "scores": response["scores"],
                "model_version": response["model_version"],
            }
        )
    return out


def run_use_case(which: str, workdir: str | Path) -> dict:
    if which == "news":
        return run_news_use_case(workdir)
    if which == "fashion":
        return run_fashion_use_case(workdir)
    raise InvalidConfig(f"unknown use case {which!r}")


def run_news_use_case(workdir: str | Path, seed: int = NEWS_SEED) -> dict:
    ws = Workspace.init(workdir, deterministic=True, project="news")
    _require_clean(ws)
    flow = ws.workflow
    flow.start("val")
    flow.advance("define-requirements", "val")
    flow.advance("initial-setup", "dev")

    # data pipeline: ingest raw text, clean/validate, split by path hash
    flow.advance("data-collection", "ada")
    corpus = synth_corpus(NEWS_CATEGORIES, 100, seed)
    ws.data.create_repo("bbc-raw")
    clean_spec = PipelineSpec(
        name="news-clean",
        inputs=(("bbc-raw", "master"),),
        transform="clean-validate-text",
        params={"min_chars": 50, "extension": ".txt"},
        trigger="on-commit",
    )
    split_spec = PipelineSpec(
        name="news-split",
        inputs=(("news-clean", "master"),),
        transform="split-dataset",
        params={"train_fraction": 0.8, "seed": seed},
        trigger="on-commit",
    )
    clean_hash = ws.pipelines.register(clean_spec)
    split_hash = ws.pipelines.register(split_spec)

    flow.advance("data-ingestion", "ada")
    raw_commit = ws.data.commit_files(
        "bbc-raw", "master", corpus, author="ada", message="ingest synthetic corpus"
    )
    flow.advance("data-versioning", "ada")
    flow.advance("data-cleaning", "ada")
    jobs = ws.pipelines.run_pending()
    if any(job.status != "succeeded" for job in jobs):
        raise RuntimeError(f"data pipeline failed: {[j.log for j in jobs if j.status != 'succeeded']}")
    flow.advance("data-validation", "ada")
    clean_commit = ws.data.head("news-clean", "master")
    split_commit = ws.data.head("news-split", "master")

    flow.advance("data-labeling", "lou")
    n_train_labels = ws.labels.auto_label("news-split", split_commit, "train", labeler="lou", under="train/")
    n_test_labels = ws.labels.auto_label("news-split", split_commit, "test", labeler="lou", under="test/")

    # model pipeline: search then train with the winning configuration
    flow.advance("create-experiment", "sam")
    flow.advance("data-analysis", "sam")
    flow.advance("data-preprocessing", "sam")
    flow.advance("validation-split", "sam")
    flow.advance("model-building", "sam")
    flow.advance("hp-optimization", "sam")
    search_config = ExperimentConfig(
        name="news-search",
        data_source={"repo": "news-split", "ref": split_commit, "split": "train"},
        entry_point=TEXT_LEARNER_ID,
        hparams={
            "hidden_size": {"categorical": [32, 64]},
            "learning_rate": {"float": [0.02, 0.2], "scale": "log"},
            "dropout": {"float": [0.0, 0.2]},
        },
        searcher={
            "kind": "asha",
            "max_resource": 45,
            "min_resource": 5,
            "reduction_factor": 3,
            "max_trials": 6,
            "seed": seed + 1,
        },
        seed=seed,
    )
    search_id = ws.experiments.run_experiment(search_config)
    search_best = ws.experiments.best_checkpoint(search_id, "validation_accuracy", "max")
    search_exp = ws.experiments.get_experiment(search_id)
    best_hparams = dict(search_exp.trials[search_best.trial_id].hparams)

    flow.advance("training", "sam")
    train_config = ExperimentConfig(
        name="news-clf",
        data_source={"repo": "news-split", "ref": split_commit, "split": "train"},
        entry_point=TEXT_LEARNER_ID,
        hparams=best_hparams,
        searcher={"kind": "single", "steps": 150},
        seed=seed,
    )
    train_id = ws.experiments.run_experiment(train_config)
    flow.advance("experiment-evaluation", "sam")
    checkpoint = ws.experiments.best_checkpoint(train_id, "validation_accuracy", "max")

    flow.advance("model-registration", "sam")
    snapshot = _source_snapshot(ws, train_config, "sam")
    mv = ws.models.register_model(
        "news-clf", checkpoint.id, train_id, snapshot, creator="sam",
        description="news category classifier",
    )
    flow.advance("model-evaluation", "sam")
    test_metrics = evaluate_checkpoint(ws, checkpoint, "news-split", split_commit, "test")
    ws.models.attach_test_metrics(
        "news-clf", mv.version,
        {"test_accuracy": test_metrics["accuracy"], "test_loss": test_metrics["loss"]},
    )
    flow.advance("model-submission", "sam")
    ws.models.submit("news-clf", mv.version, "sam")
    flow.advance("review", "val")
    ws.models.review("news-clf", mv.version, "approve", "val")
    ws.models.promote_to_production("news-clf", mv.version, "dev")

    # deployment pipeline
    flow.advance("model-packaging", "dev")
    package = ws.serving.package_model("news-clf", mv.version, TEXT_WRAPPER)
    flow.advance("model-deployment", "dev")
    deployment = ws.serving.deploy(
        {
            "deployment_name": "news-clf",
            "model_name": "news-clf",
            "selector": {"stage": "production"},
            "endpoint": "/predict/news-clf",
            "replicas": 1,
        }
    )
    flow.advance("model-monitoring", "sam")
    train_labels = ws.labels.query_labels("train", "news-split", split_commit)
    smoke_requests = []
    for path, label in train_labels[:3]:
        text = ws.data.read_file("news-split", split_commit, path).decode("utf-8")
        smoke_requests.append((label, {"data": {"text": text}}))
    smoke = _smoke_predictions(ws, "news-clf", smoke_requests)
    flow.advance("model-maintenance", "sam")

    report = {
        "use_case": "news",
        "seed": seed,
        "raw_commit": raw_commit.id,
        "clean_commit": clean_commit,
        "split_commit": split_commit,
        "clean_spec_hash": clean_hash,
        "split_spec_hash": split_hash,
        "labels": {"train": n_train_labels, "test": n_test_labels},
        "search_experiment": search_id,
        "train_experiment": train_id,
        "best_hparams": best_hparams,
        "checkpoint": checkpoint.id,
        "weight_digest": checkpoint.artifacts["weights"],
        "model": {"name": "news-clf", "version": mv.version},
        "test_accuracy": test_metrics["accuracy"],
        "test_loss": test_metrics["loss"],
        "package_hash": package.package_hash,
        "deployment": {"name": deployment.deployment_name, "endpoint": deployment.endpoint, "version": deployment.version},
        "smoke_predictions": smoke,
        "trace": trace(ws, "news-clf", mv.version),
        "workflow_iteration": flow.get_run().iteration,
    }
    _write_report(ws, report)
    return report


def run_fashion_use_case(workdir: str | Path, seed: int = FASHION_SEED) -> dict:
    ws = Workspace.init(workdir, deterministic=True, project="fashion")
    _require_clean(ws)
    flow = ws.workflow
    flow.start("val")
    flow.advance("define-requirements", "val")
    flow.advance("initial-setup", "dev")

    # train and test arrive pre-split from separate sources; the data is
    # assumed clean, so no transform pipeline is constructed
    flow.advance("data-collection", "ada")
    train_files = images_to_files(synth_images(100, seed))
    test_files = images_to_files(synth_images(20, seed + 1))
    ws.data.create_repo("fashion-train")
    ws.data.create_repo("fashion-test")
    flow.advance("data-ingestion", "ada")
    train_commit = ws.data.commit_files(
        "fashion-train", "master", train_files, author="ada", message="ingest train images"
    )
    test_commit = ws.data.commit_files(
        "fashion-test", "master", test_files, author="ada", message="ingest test images"
    )
    flow.advance("data-versioning", "ada")
    flow.advance("data-cleaning", "ada")
    flow.advance("data-validation", "ada")
    flow.advance("data-labeling", "lou")
    n_train_labels = ws.labels.auto_label("fashion-train", train_commit.id, "train", labeler="lou")
    n_test_labels = ws.labels.auto_label("fashion-test", test_commit.id, "test", labeler="lou")

    flow.advance("create-experiment", "sam")
    flow.advance("data-analysis", "sam")
    flow.advance("data-preprocessing", "sam")
    flow.advance("validation-split", "sam")
    flow.advance("model-building", "sam")
    flow.advance("training", "sam")
    train_config = ExperimentConfig(
        name="fashion-clf",
        data_source={"repo": "fashion-train", "ref": train_commit.id, "split": "train"},
        entry_point=IMAGE_LEARNER_ID,
        hparams={"hidden_size": 64, "learning_rate": 0.1, "batch_size": 32},
        searcher={"kind": "single", "steps": 200},
        seed=seed,
    )
    train_id = ws.experiments.run_experiment(train_config)
    flow.advance("experiment-evaluation", "sam")
    checkpoint = ws.experiments.best_checkpoint(train_id, "validation_accuracy", "max")

    flow.advance("model-registration", "sam")
    snapshot = _source_snapshot(ws, train_config, "sam")
    mv = ws.models.register_model(
        "fashion-clf", checkpoint.id, train_id, snapshot, creator="sam",
        description="fashion article classifier",
    )
    flow.advance("model-evaluation", "sam")
    test_metrics = evaluate_checkpoint(ws, checkpoint, "fashion-test", test_commit.id, "test")
    ws.models.attach_test_metrics(
        "fashion-clf", mv.version,
        {"test_accuracy": test_metrics["accuracy"], "test_loss": test_metrics["loss"]},
    )
    flow.advance("model-submission", "sam")
    ws.models.submit("fashion-clf", mv.version, "sam")
    flow.advance("review", "val")
    ws.models.review("fashion-clf", mv.version, "approve", "val")
    ws.models.promote_to_production("fashion-clf", mv.version, "dev")

    flow.advance("model-packaging", "dev")
    package = ws.serving.package_model("fashion-clf", mv.version, IMAGE_WRAPPER)
    flow.advance("model-deployment", "dev")
    deployment = ws.serving.deploy(
        {
            "deployment_name": "fashion-clf",
            "model_name": "fashion-clf",
            "selector": {"stage": "production"},
            "endpoint": "/predict/fashion-clf",
        }
    )
    flow.advance("model-monitoring", "sam")
    test_labels = ws.labels.query_labels("test", "fashion-test", test_commit.id)
    smoke_requests = []
    for path, label in test_labels[:3]:
        raw = ws.data.read_file("fashion-test", test_commit.id, path)
        matrix = decode_image(raw)
        smoke_requests.append((label, {"data": {"image": matrix.tolist()}}))
    smoke = _smoke_predictions(ws, "fashion-clf", smoke_requests)
    flow.advance("model-maintenance", "sam")

    report = {
        "use_case": "fashion",
        "seed": seed,
        "train_commit": train_commit.id,
        "test_commit": test_commit.id,
        "labels": {"train": n_train_labels, "test": n_test_labels},
        "train_experiment": train_id,
        "checkpoint": checkpoint.id,
        "weight_digest": checkpoint.artifacts["weights"],
        "model": {"name": "fashion-clf", "version": mv.version},
        "test_accuracy": test_metrics["accuracy"],
        "test_loss": test_metrics["loss"],
        "package_hash": package.package_hash,
        "deployment": {"name": deployment.deployment_name, "endpoint": deployment.endpoint, "version": deployment.version},
        "smoke_predictions": smoke,
        "trace": trace(ws, "fashion-clf", mv.version),
        "workflow_iteration": flow.get_run().iteration,
    }
    _write_report(ws, report)
    return report


def _write_report(ws: Workspace, report: dict) -> None:
    (ws.root / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
