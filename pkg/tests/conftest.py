import json

import pytest

from dlflow.experiment import ExperimentConfig
from dlflow.learners import TEXT_LEARNER_ID, synth_corpus
from dlflow.pipeline import PipelineSpec
from dlflow.serving import TEXT_WRAPPER
from dlflow.usecases import evaluate_checkpoint, run_fashion_use_case, run_news_use_case
from dlflow.workspace import Workspace


@pytest.fixture
def ws(tmp_path):
    return Workspace.init(tmp_path / "root", deterministic=True)


@pytest.fixture(scope="session")
def news_report_rerun(tmp_path_factory):
    root = tmp_path_factory.mktemp("news-rerun") / "ws"
    return run_news_use_case(root)


@pytest.fixture(scope="session")
def fashion_report(tmp_path_factory):
    root = tmp_path_factory.mktemp("fashion") / "ws"
    return run_fashion_use_case(root)


def build_served_text_model(root) -> tuple[Workspace, dict]:
    """A small corpus trained, registered, promoted, and deployed; shared by
    serving and tracing tests."""
    ws = Workspace.init(root, deterministic=True)
    corpus = synth_corpus(("alpha", "beta", "gamma"), 30, seed=5)
    ws.data.create_repo("mini-raw")
    ws.pipelines.register(
        PipelineSpec(
            name="mini-clean",
            inputs=(("mini-raw", "master"),),
            transform="clean-validate-text",
            params={"min_chars": 20, "extension": ".txt"},
            trigger="on-commit",
        )
    )
    ws.pipelines.register(
        PipelineSpec(
            name="mini-split",
            inputs=(("mini-clean", "master"),),
            transform="split-dataset",
            params={"train_fraction": 0.8, "seed": 5},
            trigger="on-commit",
        )
    )
    raw = ws.data.commit_files("mini-raw", "master", corpus, author="ada", message="ingest")
    ws.pipelines.run_pending()
    split_head = ws.data.head("mini-split", "master")
    ws.labels.auto_label("mini-split", split_head, "train", under="train/")
    ws.labels.auto_label("mini-split", split_head, "test", under="test/")
    config = ExperimentConfig(
        name="mini-clf",
        data_source={"repo": "mini-split", "ref": split_head, "split": "train"},
        entry_point=TEXT_LEARNER_ID,
        hparams={"hidden_size": 32, "learning_rate": 0.1, "dropout": 0.05, "vocab_size": 400},
        searcher={"kind": "single", "steps": 60},
        seed=5,
    )
    exp_id = ws.experiments.run_experiment(config)
    ckpt = ws.experiments.best_checkpoint(exp_id, "validation_accuracy", "max")
    ws.data.ensure_repo("_workspace", internal=True)
    snap = ws.data.commit_files(
        "_workspace",
        "master",
        {"experiment.json": json.dumps(config.hparams).encode()},
        author="sam",
        message="snapshot",
    )
    mv = ws.models.register_model("mini-clf", ckpt.id, exp_id, snap.id, creator="sam")
    test_metrics = evaluate_checkpoint(ws, ckpt, "mini-split", split_head, "test")
    ws.models.attach_test_metrics(
        "mini-clf", mv.version,
        {"test_accuracy": test_metrics["accuracy"], "test_loss": test_metrics["loss"]},
    )
    ws.models.submit("mini-clf", mv.version, "sam")
    ws.models.review("mini-clf", mv.version, "approve", "val")
    ws.models.promote_to_production("mini-clf", mv.version, "dev")
    ws.serving.package_model("mini-clf", mv.version, TEXT_WRAPPER)
    deployment = ws.serving.deploy(
        {"deployment_name": "mini-clf", "model_name": "mini-clf", "selector": {"stage": "production"}}
    )
    info = {
        "raw_commit": raw.id,
        "split_head": split_head,
        "experiment": exp_id,
        "checkpoint": ckpt.id,
        "version": mv.version,
        "deployment": deployment.deployment_name,
        "test_accuracy": test_metrics["accuracy"],
    }
    return ws, info


@pytest.fixture(scope="session")
def served(tmp_path_factory):
    root = tmp_path_factory.mktemp("served") / "ws"
    return build_served_text_model(root)
