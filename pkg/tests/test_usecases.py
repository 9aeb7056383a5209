"""Use-case report shape: artifact ids, trace structure, smoke predictions."""


def test_news_trace_chain_depth(news_report_rerun):
    chain = news_report_rerun["trace"]["chain"]
    assert len(chain) >= 4  # model, experiment, split commit, clean commit, raw commit
    kinds = [link["kind"] for link in chain]
    assert kinds[0] == "model"
    assert "experiment" in kinds
    assert kinds[-1] == "source-commit"
    assert chain[-1]["id"] == news_report_rerun["raw_commit"]


def test_news_report_gate_and_counts(news_report_rerun):
    report = news_report_rerun
    assert report["test_accuracy"] >= 0.7
    assert report["labels"]["train"] + report["labels"]["test"] == 500
    assert report["model"]["version"] == 1
    assert report["deployment"]["version"] == 1
    assert report["workflow_iteration"] == 1
    for smoke in report["smoke_predictions"]:
        assert smoke["label"] == smoke["expected"]
        assert abs(sum(smoke["scores"].values()) - 1.0) < 1e-9


def test_fashion_trace_terminates_at_manual_commit(fashion_report):
    # no data pipeline: the dataset commit is the raw ingestion commit and
    # carries no provenance record
    traced = fashion_report["trace"]
    assert traced["raw_commit"] == fashion_report["train_commit"]
    assert traced["lineage"]["nodes"] == [fashion_report["train_commit"]]
    assert traced["lineage"]["edges"] == []
    assert traced["dataset_digest"]["match"] is True


def test_fashion_labels_and_classes(fashion_report):
    assert fashion_report["labels"] == {"train": 1000, "test": 200}
    labels = {s["label"] for s in fashion_report["smoke_predictions"]}
    assert labels <= {
        "tshirt-top", "trouser", "pullover", "dress", "coat",
        "sandal", "shirt", "sneaker", "bag", "ankle-boot",
    }
