"""
Labels pinned to commits
========================

Ground truth lives next to the data it describes: every record references
a (repo, commit, path) triple, so an experiment's training set is fully
determined by the commit id it was pinned to.
"""

import json
import tempfile

from dlflow import Workspace
from dlflow.errors import DanglingPath

ws = Workspace.init(tempfile.mkdtemp() + "/demo", deterministic=True)
ws.data.create_repo("articles")

# Label files are line-delimited records committed alongside the data.
files = {
    "sport/a.txt": b"football",
    "sport/b.txt": b"cricket",
    "tech/a.txt": b"phones",
}
rows = [
    {"path": "sport/a.txt", "label": "sport", "labeler": "lou"},
    {"path": "sport/b.txt", "label": "sport", "labeler": "lou"},
    {"path": "tech/a.txt", "label": "tech", "labeler": "lou"},
]
files["labels.jsonl"] = "\n".join(json.dumps(r) for r in rows).encode()
commit = ws.data.commit_files("articles", "master", files, author="lou", message="labeled")

count = ws.labels.import_labels("articles", "master", "labels.jsonl", split="train")
print("imported:", count)
print("query:", ws.labels.query_labels("train", "articles", commit.id))

# Imports are atomic: one dangling row rejects the whole file.
bad = dict(files)
bad["labels.jsonl"] = json.dumps({"path": "missing.txt", "label": "x"}).encode()
second = ws.data.commit_files("articles", "master", bad, author="lou", message="bad labels")
try:
    ws.labels.import_labels("articles", second.id, "labels.jsonl", split="train")
except DanglingPath as exc:
    print("rejected atomically:", exc)
print("second commit has no labels:", ws.labels.query_labels("train", "articles", second.id))

# Auto-labeling derives categories from the <category>/<file> convention.
auto = ws.labels.auto_label("articles", commit.id, split="test", labeler="auto")
print("auto-labeled:", auto, "->", ws.labels.query_labels("test", "articles", commit.id))
