"""Label store: atomic imports, version pinning, auto-labeling."""

import json

import pytest

from dlflow.errors import DanglingPath, MalformedRow, NotFound


def _label_line(path, label, labeler="lou"):
    return json.dumps({"path": path, "label": label, "labeler": labeler})


def _commit_with_labels(ws, rows, extra_files=None):
    ws.data.create_repo("docs")
    files = {f"cat{i % 2}/f{i}.txt": b"body" for i in range(8)}
    if extra_files:
        files.update(extra_files)
    label_file = "\n".join(_label_line(p, l) for p, l in rows).encode("utf-8")
    files["labels.jsonl"] = label_file
    return ws.data.commit_files("docs", "master", files, "lou", "with labels")


def test_import_counts_and_query(ws):
    rows = [(f"cat{i % 2}/f{i}.txt", f"cat{i % 2}") for i in range(8)]
    commit = _commit_with_labels(ws, rows)
    count = ws.labels.import_labels("docs", "master", "labels.jsonl", "train")
    assert count == 8
    result = ws.labels.query_labels("train", "docs", commit.id)
    assert len(result) == 8
    assert result == sorted(result)


def test_import_dangling_path_rejects_all(ws):
    rows = [("cat0/f0.txt", "cat0"), ("missing/file.txt", "cat1")]
    _commit_with_labels(ws, rows)
    with pytest.raises(DanglingPath):
        ws.labels.import_labels("docs", "master", "labels.jsonl", "train")
    assert ws.labels.query_labels("train", "docs", "master") == []


def test_import_malformed_row(ws):
    ws.data.create_repo("docs")
    files = {"a.txt": b"x", "labels.jsonl": b'{"path": "a.txt"}\n'}  # no label field
    ws.data.commit_files("docs", "master", files, "lou", "m")
    with pytest.raises(MalformedRow):
        ws.labels.import_labels("docs", "master", "labels.jsonl", "train")


def test_reimport_idempotent(ws):
    rows = [(f"cat{i % 2}/f{i}.txt", f"cat{i % 2}") for i in range(8)]
    commit = _commit_with_labels(ws, rows)
    ws.labels.import_labels("docs", "master", "labels.jsonl", "train")
    first = ws.labels.query_labels("train", "docs", commit.id)
    ws.labels.import_labels("docs", "master", "labels.jsonl", "train")
    assert ws.labels.query_labels("train", "docs", commit.id) == first


def test_relabel_overwrites(ws):
    rows = [("cat0/f0.txt", "old")]
    commit = _commit_with_labels(ws, rows)
    ws.labels.import_labels("docs", "master", "labels.jsonl", "train")
    files = ws.data.read_all_files("docs", commit.id)
    files["labels.jsonl"] = _label_line("cat0/f0.txt", "new").encode("utf-8")
    ws.data.commit_files("docs", "master", files, "lou", "relabel")
    # same tree paths, new commit: old commit's labels remain pinned
    ws.labels.import_labels("docs", "master", "labels.jsonl", "train")
    assert ("cat0/f0.txt", "old") in ws.labels.query_labels("train", "docs", commit.id)
    assert ("cat0/f0.txt", "new") in ws.labels.query_labels("train", "docs", "master")


def test_query_empty_store(ws):
    ws.data.create_repo("docs")
    ws.data.commit_files("docs", "master", {"a.txt": b"x"}, "ada", "m")
    assert ws.labels.query_labels("train", "docs", "master") == []


def test_version_pinning(ws):
    rows = [("cat0/f0.txt", "cat0")]
    c1 = _commit_with_labels(ws, rows)
    ws.labels.import_labels("docs", "master", "labels.jsonl", "train")
    c2 = ws.data.commit_files("docs", "master", {"other.txt": b"x"}, "ada", "m2")
    assert ws.labels.query_labels("train", "docs", c1.id) != []
    assert ws.labels.query_labels("train", "docs", c2.id) == []


def test_query_unknown_ref(ws):
    ws.data.create_repo("docs")
    with pytest.raises(NotFound):
        ws.labels.query_labels("train", "docs", "no-such-ref")


def test_auto_label_from_path_prefix(ws):
    ws.data.create_repo("docs")
    files = {}
    for cat in ("business", "entertainment", "politics", "sport", "tech"):
        for i in range(3):
            files[f"{cat}/{i}.txt"] = b"body"
    files["loose.txt"] = b"no category"
    commit = ws.data.commit_files("docs", "master", files, "ada", "m")
    count = ws.labels.auto_label("docs", commit.id, "train")
    assert count == 15
    labels = ws.labels.query_labels("train", "docs", commit.id)
    assert {label for _p, label in labels} == {
        "business", "entertainment", "politics", "sport", "tech"
    }


def test_auto_label_under_prefix(ws):
    ws.data.create_repo("docs")
    files = {
        "train/cat0/a.txt": b"x",
        "train/cat1/b.txt": b"x",
        "test/cat0/c.txt": b"x",
    }
    commit = ws.data.commit_files("docs", "master", files, "ada", "m")
    assert ws.labels.auto_label("docs", commit.id, "train", under="train/") == 2
    labels = ws.labels.query_labels("train", "docs", commit.id)
    assert labels == [("train/cat0/a.txt", "cat0"), ("train/cat1/b.txt", "cat1")]


def test_referential_integrity(ws):
    rows = [(f"cat{i % 2}/f{i}.txt", f"cat{i % 2}") for i in range(8)]
    commit = _commit_with_labels(ws, rows)
    ws.labels.import_labels("docs", "master", "labels.jsonl", "train")
    for path, _label in ws.labels.query_labels("train", "docs", commit.id):
        assert ws.data.read_file("docs", commit.id, path) == b"body"
